#include "colav/mpc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace colav {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMeritPenalty = 1e5;  // weight on dynamics/ellipse violation
constexpr double kSqpTol = 1e-8;
}  // namespace

AdmmSettings MpcConfig::default_subproblem_settings() {
  AdmmSettings s;
  s.eps_abs = 1e-4;
  s.eps_rel = 1e-4;
  s.max_iter = 1500;
  s.check_every = 10;
  return s;
}

void MpcConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("MpcConfig: horizon must be >= 2");
  if (!(dt > 0.0)) throw std::invalid_argument("MpcConfig: dt must be > 0");
  if (!(control_period > 0.0)) throw std::invalid_argument("MpcConfig: control_period must be > 0");
  if ((q_weights.array() < 0.0).any() || (rd_weights.array() < 0.0).any())
    throw std::invalid_argument("MpcConfig: weights must be >= 0");
  if (!(r_weights.minCoeff() > 0.0) || !(qt_weights.maxCoeff() > 0.0))
    throw std::invalid_argument("MpcConfig: R must be positive definite");
  if (!(ellipse_m_factor > 0.0) || !(ellipse_n_factor > 0.0))
    throw std::invalid_argument("MpcConfig: ellipse axes must be > 0");
  if (!(slack_weight > 0.0)) throw std::invalid_argument("MpcConfig: slack_weight must be > 0");
  if (max_sqp_iter < 1 || warm_sqp_iter < 1)
    throw std::invalid_argument("MpcConfig: iteration budgets must be >= 1");
}

PathFrameState to_path_frame(const ShipState& state, const WaypointPath& path,
                             std::size_t segment) {
  const Vec2 de = path_frame_point(path, segment, state.position());
  PathFrameState x;
  x.d = de.x();
  x.e = de.y();
  x.psi_e = wrap_angle(state.psi - segment_course(path, segment));
  x.u = state.u;
  return x;
}

Vec2 path_frame_point(const WaypointPath& path, std::size_t segment, const Vec2& p) {
  if (segment >= path.segment_count())
    throw std::invalid_argument("path_frame_point: segment out of range");
  double cum = 0.0;
  for (std::size_t k = 0; k < segment; ++k)
    cum += (path.waypoints[k + 1] - path.waypoints[k]).norm();
  const Vec2 a = path.waypoints[segment];
  const Vec2 t = (path.waypoints[segment + 1] - a).normalized();
  const Vec2 rel = p - a;
  return {cum + t.dot(rel), cross2(t, rel)};
}

PathFrameState path_dynamics_step(const PathFrameState& x, const ControlInput& in, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("path_dynamics_step: dt must be > 0");
  auto f = [&](const Eigen::Vector4d& v) -> Eigen::Vector4d {
    return {v(3) * std::cos(v(2)), v(3) * std::sin(v(2)), in.r, in.a};
  };
  const Eigen::Vector4d v = x.vec();
  const Eigen::Vector4d k1 = f(v);
  const Eigen::Vector4d k2 = f(v + 0.5 * dt * k1);
  const Eigen::Vector4d k3 = f(v + 0.5 * dt * k2);
  const Eigen::Vector4d k4 = f(v + dt * k3);
  return PathFrameState::from_vec(v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

void path_dynamics_jacobians(const PathFrameState& x, const ControlInput& in, double dt,
                             Eigen::Matrix4d& A, Eigen::Matrix<double, 4, 2>& B) {
  auto f = [&](const Eigen::Vector4d& v) -> Eigen::Vector4d {
    return {v(3) * std::cos(v(2)), v(3) * std::sin(v(2)), in.r, in.a};
  };
  auto fx = [](const Eigen::Vector4d& v) {
    Eigen::Matrix4d j = Eigen::Matrix4d::Zero();
    j(0, 2) = -v(3) * std::sin(v(2));
    j(0, 3) = std::cos(v(2));
    j(1, 2) = v(3) * std::cos(v(2));
    j(1, 3) = std::sin(v(2));
    return j;
  };
  Eigen::Matrix<double, 4, 2> fu = Eigen::Matrix<double, 4, 2>::Zero();
  fu(2, 1) = 1.0;  // dpsi_e/dr
  fu(3, 0) = 1.0;  // du/da

  const Eigen::Vector4d v = x.vec();
  const Eigen::Matrix4d I = Eigen::Matrix4d::Identity();

  const Eigen::Vector4d k1 = f(v);
  const Eigen::Matrix4d K1x = fx(v);
  const Eigen::Matrix<double, 4, 2> K1u = fu;

  const Eigen::Vector4d v2 = v + 0.5 * dt * k1;
  const Eigen::Matrix4d K2x = fx(v2) * (I + 0.5 * dt * K1x);
  const Eigen::Matrix<double, 4, 2> K2u = fx(v2) * (0.5 * dt * K1u) + fu;

  const Eigen::Vector4d v3 = v + 0.5 * dt * f(v2);
  const Eigen::Matrix4d K3x = fx(v3) * (I + 0.5 * dt * K2x);
  const Eigen::Matrix<double, 4, 2> K3u = fx(v3) * (0.5 * dt * K2u) + fu;

  const Eigen::Vector4d v4 = v + dt * f(v3);
  const Eigen::Matrix4d K4x = fx(v4) * (I + dt * K3x);
  const Eigen::Matrix<double, 4, 2> K4u = fx(v4) * (dt * K3u) + fu;

  A = I + dt / 6.0 * (K1x + 2.0 * K2x + 2.0 * K3x + K4x);
  B = dt / 6.0 * (K1u + 2.0 * K2u + 2.0 * K3u + K4u);
}

namespace {

double ellipse_center_e(const Vec2& center, double o_r, AvoidanceDirection side, double m) {
  // Left-side avoidance blocks the right flank of the obstacle and vice
  // versa; with m < 2*o_r the shift keeps a strict side preference.
  return side == AvoidanceDirection::Left ? center.y() - 2.0 * o_r + m
                                          : center.y() + 2.0 * o_r - m;
}

}  // namespace

double ellipse_residual(const PathFrameState& x, const Vec2& center, double o_r,
                        AvoidanceDirection side, double m, double n) {
  if (!(m > 0.0) || !(n > 0.0)) throw std::invalid_argument("ellipse_residual: axes must be > 0");
  const double ce = ellipse_center_e(center, o_r, side, m);
  const double de = (x.e - ce) / m;
  const double dd = (x.d - center.x()) / n;
  return de * de + dd * dd - 1.0;
}

Vec2 ellipse_gradient(const PathFrameState& x, const Vec2& center, double o_r,
                      AvoidanceDirection side, double m, double n) {
  const double ce = ellipse_center_e(center, o_r, side, m);
  return {2.0 * (x.d - center.x()) / (n * n), 2.0 * (x.e - ce) / (m * m)};
}

ObstacleForecast forecast_obstacle(const ShipState& traffic, double obstacle_radius,
                                   AvoidanceDirection side, const WaypointPath& path,
                                   std::size_t segment, int horizon, double dt) {
  ObstacleForecast fc;
  fc.radius = obstacle_radius;
  fc.side = side;
  fc.centers.reserve(horizon + 1);
  const Vec2 vel = traffic.velocity();
  for (int i = 0; i <= horizon; ++i)
    fc.centers.push_back(path_frame_point(path, segment, traffic.position() + i * dt * vel));
  return fc;
}

MpcController::MpcController(const MpcConfig& cfg, const ShipParams& limits)
    : cfg_(cfg), limits_(limits) {
  cfg_.validate();
  limits_.validate();
}

void MpcController::reset() {
  have_warm_ = false;
  have_trajectory_ = false;
  inputs_.clear();
  states_.clear();
}

void MpcController::cold_start(const PathFrameState& x0) {
  const int N = cfg_.horizon;
  inputs_.assign(N, ControlInput{0.0, 0.0});
  states_.clear();
  states_.reserve(N);
  PathFrameState x = x0;
  for (int i = 0; i < N; ++i) {
    x = path_dynamics_step(x, inputs_[i], cfg_.dt);
    states_.push_back(x);
  }
}

void MpcController::shift_stages() {
  const int N = cfg_.horizon;
  for (int i = 0; i + 1 < N; ++i) inputs_[i] = inputs_[i + 1];
  for (int i = 0; i + 1 < N; ++i) states_[i] = states_[i + 1];
  states_[N - 1] = path_dynamics_step(states_[N - 2], inputs_[N - 1], cfg_.dt);
}

MpcController::Subproblem MpcController::build_qp(const PathFrameState& x0,
                                                  const std::vector<ObstacleForecast>& forecasts,
                                                  const ControlInput& previous_applied) const {
  const int N = cfg_.horizon;
  const int n_obs = static_cast<int>(forecasts.size());
  const int nu = 2 * N;
  const int nx = 4 * N;
  const int ns = N * n_obs;
  const int n = nu + ns;

  Subproblem sub;
  sub.gamma = Eigen::MatrixXd::Zero(nx, nu);
  sub.phi = Eigen::VectorXd::Zero(nx);

  // delta_x_{i+1} = A_i delta_x_i + B_i delta_u_i + defect_i, delta_x_0 = 0.
  Eigen::Matrix4d Ai;
  Eigen::Matrix<double, 4, 2> Bi;
  for (int i = 0; i < N; ++i) {
    const PathFrameState& xi = i == 0 ? x0 : states_[i - 1];
    path_dynamics_jacobians(xi, inputs_[i], cfg_.dt, Ai, Bi);
    const Eigen::Vector4d defect =
        path_dynamics_step(xi, inputs_[i], cfg_.dt).vec() - states_[i].vec();
    if (i == 0) {
      sub.phi.head<4>() = defect;
    } else {
      sub.gamma.middleRows<4>(4 * i).leftCols(2 * i).noalias() =
          Ai * sub.gamma.middleRows<4>(4 * (i - 1)).leftCols(2 * i);
      sub.phi.segment<4>(4 * i) = Ai * sub.phi.segment<4>(4 * (i - 1)) + defect;
    }
    sub.gamma.block<4, 2>(4 * i, 2 * i) = Bi;
  }

  DenseQp& qp = sub.qp;
  qp.H = Eigen::MatrixXd::Zero(n, n);
  qp.f = Eigen::VectorXd::Zero(n);
  qp.A = Eigen::MatrixXd::Zero(ns, n);
  qp.b = Eigen::VectorXd::Zero(ns);
  qp.lower = Eigen::VectorXd::Constant(n, -kInf);
  qp.upper = Eigen::VectorXd::Constant(n, kInf);

  const Eigen::Vector4d ref(0.0, 0.0, 0.0, cfg_.u_ref);
  const Eigen::Matrix2d R2 = 2.0 * cfg_.r_weights.asDiagonal();
  const Eigen::Matrix2d Rd2 = 2.0 * cfg_.rd_weights.asDiagonal();

  // State tracking cost mapped through gamma: stack per-stage weights and the
  // linear term at delta_x = phi.
  Eigen::VectorXd wstack(nx), cstack(nx);
  for (int i = 1; i <= N; ++i) {
    const Eigen::Vector4d w = i == N ? cfg_.qt_weights : cfg_.q_weights;
    wstack.segment<4>(4 * (i - 1)) = w;
    cstack.segment<4>(4 * (i - 1)) =
        states_[i - 1].vec() - ref + sub.phi.segment<4>(4 * (i - 1));
  }
  const Eigen::MatrixXd wgamma = wstack.asDiagonal() * sub.gamma;
  qp.H.topLeftCorner(nu, nu).noalias() = 2.0 * sub.gamma.transpose() * wgamma;
  qp.f.head(nu).noalias() = 2.0 * sub.gamma.transpose() * wstack.cwiseProduct(cstack);

  for (int i = 0; i < N; ++i) {
    const Eigen::Vector2d ui(inputs_[i].a, inputs_[i].r);
    qp.H.block<2, 2>(2 * i, 2 * i) += R2;
    qp.f.segment<2>(2 * i) += R2 * ui;

    const Eigen::Vector2d up = i == 0
                                   ? Eigen::Vector2d(previous_applied.a, previous_applied.r)
                                   : Eigen::Vector2d(inputs_[i - 1].a, inputs_[i - 1].r);
    const Eigen::Vector2d du = ui - up;
    qp.H.block<2, 2>(2 * i, 2 * i) += Rd2;
    qp.f.segment<2>(2 * i) += Rd2 * du;
    if (i > 0) {
      qp.H.block<2, 2>(2 * (i - 1), 2 * (i - 1)) += Rd2;
      qp.H.block<2, 2>(2 * i, 2 * (i - 1)) -= Rd2;
      qp.H.block<2, 2>(2 * (i - 1), 2 * i) -= Rd2;
      qp.f.segment<2>(2 * (i - 1)) -= Rd2 * du;
    }

    qp.lower(2 * i + 0) = -limits_.a_max - ui(0);
    qp.upper(2 * i + 0) = limits_.a_max - ui(0);
    qp.lower(2 * i + 1) = -limits_.r_max - ui(1);
    qp.upper(2 * i + 1) = limits_.r_max - ui(1);
  }

  // Linearized ellipse constraints, one slack each, mapped into input space.
  for (int i = 1; i <= N; ++i) {
    for (int j = 0; j < n_obs; ++j) {
      const int row = (i - 1) * n_obs + j;
      const int slack = nu + row;
      const ObstacleForecast& fc = forecasts[j];
      const double mm = cfg_.ellipse_m_factor * fc.radius;
      const double nn = cfg_.ellipse_n_factor * fc.radius;
      const PathFrameState& xi = states_[i - 1];
      const double g = ellipse_residual(xi, fc.centers[i], fc.radius, fc.side, mm, nn);
      const Vec2 grad = ellipse_gradient(xi, fc.centers[i], fc.radius, fc.side, mm, nn);
      qp.A.block(row, 0, 1, nu) = grad.x() * sub.gamma.row(4 * (i - 1)) +
                                  grad.y() * sub.gamma.row(4 * (i - 1) + 1);
      qp.A(row, slack) = 1.0;
      qp.b(row) = -g - grad.x() * sub.phi(4 * (i - 1)) - grad.y() * sub.phi(4 * (i - 1) + 1);
      qp.lower(slack) = 0.0;
      qp.H(slack, slack) += 2.0 * cfg_.slack_weight;
      qp.f(slack) += cfg_.slack_weight;
    }
  }

  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();
  return sub;
}

double MpcController::merit(const std::vector<PathFrameState>& states,
                            const std::vector<ControlInput>& inputs, const PathFrameState& x0,
                            const std::vector<ObstacleForecast>& forecasts,
                            const ControlInput& previous_applied) const {
  const int N = cfg_.horizon;
  const Eigen::Vector4d ref(0.0, 0.0, 0.0, cfg_.u_ref);
  double cost = 0.0;
  for (int i = 0; i < N; ++i) {
    const Eigen::Vector2d ui(inputs[i].a, inputs[i].r);
    cost += ui.dot(cfg_.r_weights.cwiseProduct(ui));
    const Eigen::Vector2d up = i == 0 ? Eigen::Vector2d(previous_applied.a, previous_applied.r)
                                      : Eigen::Vector2d(inputs[i - 1].a, inputs[i - 1].r);
    const Eigen::Vector2d du = ui - up;
    cost += du.dot(cfg_.rd_weights.cwiseProduct(du));
    const Eigen::Vector4d w = i + 1 == N ? cfg_.qt_weights : cfg_.q_weights;
    const Eigen::Vector4d dx = states[i].vec() - ref;
    cost += dx.dot(w.cwiseProduct(dx));
  }

  double violation = 0.0;
  for (int i = 0; i < N; ++i) {
    const PathFrameState& xi = i == 0 ? x0 : states[i - 1];
    violation +=
        (path_dynamics_step(xi, inputs[i], cfg_.dt).vec() - states[i].vec()).cwiseAbs().sum();
  }
  for (int i = 1; i <= N; ++i) {
    for (const ObstacleForecast& fc : forecasts) {
      const double mm = cfg_.ellipse_m_factor * fc.radius;
      const double nn = cfg_.ellipse_n_factor * fc.radius;
      violation += std::max(
          0.0, -ellipse_residual(states[i - 1], fc.centers[i], fc.radius, fc.side, mm, nn));
    }
  }
  return cost + kMeritPenalty * violation;
}

MpcController::Result MpcController::solve(const PathFrameState& x0,
                                           const std::vector<ObstacleForecast>& forecasts,
                                           const ControlInput& previous_applied) {
  if (!std::isfinite(x0.d) || !std::isfinite(x0.e) || !std::isfinite(x0.psi_e) ||
      !std::isfinite(x0.u))
    throw std::invalid_argument("MpcController::solve: non-finite state");
  for (const ObstacleForecast& fc : forecasts)
    if (static_cast<int>(fc.centers.size()) != cfg_.horizon + 1)
      throw std::invalid_argument("MpcController::solve: forecast length mismatch");

  const int N = cfg_.horizon;
  int budget = cfg_.max_sqp_iter;
  if (!have_trajectory_) {
    cold_start(x0);
    have_trajectory_ = true;
  } else {
    if (cfg_.control_period >= 0.5 * cfg_.dt) shift_stages();
    budget = cfg_.warm_sqp_iter;
  }

  Result result;
  std::vector<PathFrameState> best_states = states_;
  std::vector<ControlInput> best_inputs = inputs_;
  double best_merit = merit(states_, inputs_, x0, forecasts, previous_applied);
  double best_slack = 0.0;

  const int ns = N * static_cast<int>(forecasts.size());
  for (int it = 0; it < budget; ++it) {
    const Subproblem sub = build_qp(x0, forecasts, previous_applied);
    const bool can_warm = have_warm_ && warm_.z.size() == sub.qp.num_vars() &&
                          warm_.dual_ineq.size() == sub.qp.num_ineq();
    const QpSolution sol = solve_admm(sub.qp, cfg_.qp, can_warm ? &warm_ : nullptr);
    warm_ = sol;
    have_warm_ = true;
    result.qp_iterations += sol.iterations;
    ++result.sqp_iterations;
    if (sol.status != QpStatus::Optimal) result.degraded = true;

    double step_norm = 0.0;
    for (int i = 0; i < N; ++i) {
      inputs_[i].a += sol.z(2 * i);
      inputs_[i].r += sol.z(2 * i + 1);
      inputs_[i].a = std::clamp(inputs_[i].a, -limits_.a_max, limits_.a_max);
      inputs_[i].r = std::clamp(inputs_[i].r, -limits_.r_max, limits_.r_max);
      step_norm = std::max({step_norm, std::abs(sol.z(2 * i)), std::abs(sol.z(2 * i + 1))});
    }
    const Eigen::VectorXd dx_stack =
        sub.gamma * sol.z.head(2 * N) + sub.phi;
    for (int i = 1; i <= N; ++i) {
      const Eigen::Vector4d dx = dx_stack.segment<4>(4 * (i - 1));
      states_[i - 1] = PathFrameState::from_vec(states_[i - 1].vec() + dx);
      step_norm = std::max(step_norm, dx.cwiseAbs().maxCoeff());
    }

    const double m_now = merit(states_, inputs_, x0, forecasts, previous_applied);
    if (m_now <= best_merit || it == 0) {
      best_merit = m_now;
      best_states = states_;
      best_inputs = inputs_;
      best_slack = ns > 0 ? sol.z.tail(ns).sum() : 0.0;
    }
    if (step_norm < kSqpTol) break;
  }

  if (budget > 1) {
    // Keep the best iterate when a cold-start SQP wandered.
    states_ = best_states;
    inputs_ = best_inputs;
  }

  result.slack_total = best_slack;
  result.merit = merit(states_, inputs_, x0, forecasts, previous_applied);
  result.input = ControlInput{std::clamp(inputs_[0].a, -limits_.a_max, limits_.a_max),
                              std::clamp(inputs_[0].r, -limits_.r_max, limits_.r_max)};
  return result;
}

}  // namespace colav
