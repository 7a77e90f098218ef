#include "colav/tccbf.hpp"

#include <cstdio>

#include <stdexcept>

namespace colav {

void TcCbfParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("TcCbfParams: alpha must be > 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("TcCbfParams: gamma must be > 0");
  if (!(r_max > 0.0)) throw std::invalid_argument("TcCbfParams: r_max must be > 0");
  if (!(safe_radius > 0.0)) throw std::invalid_argument("TcCbfParams: safe_radius must be > 0");
  if ((weight - weight.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("TcCbfParams: weight must be symmetric");
  if (Eigen::LLT<Eigen::Matrix2d>(weight).info() != Eigen::Success)
    throw std::invalid_argument("TcCbfParams: weight must be positive definite");
}

double turning_radius(double u, const TcCbfParams& params) {
  return params.alpha * u / params.r_max;
}

namespace {

// +pi/2 offsets the left circle, -pi/2 the right one.
double side_sign(AvoidanceDirection side) { return side == AvoidanceDirection::Left ? 1.0 : -1.0; }

}  // namespace

std::pair<TurningCircle, TurningCircle> circle_centers(const ShipState& state, double radius) {
  const Vec2 pos = state.position();
  TurningCircle right{pos + radius * heading_vector(state.psi - kPi / 2.0), radius,
                      AvoidanceDirection::Right};
  TurningCircle left{pos + radius * heading_vector(state.psi + kPi / 2.0), radius,
                     AvoidanceDirection::Left};
  return {right, left};
}

double h_value(const ShipState& state, const Obstacle& obs, AvoidanceDirection side,
               const TcCbfParams& params) {
  const double radius = turning_radius(state.u, params);
  const Vec2 center = state.position() + radius * heading_vector(state.psi + side_sign(side) * kPi / 2.0);
  const double margin = obs.radius + params.safe_radius + radius;
  return (center - obs.position).squaredNorm() - margin * margin;
}

CbfConstraint h_dot_affine(const ShipState& state, const Obstacle& obs, AvoidanceDirection side,
                           const TcCbfParams& params) {
  const double s = side_sign(side);
  const double radius = turning_radius(state.u, params);
  const double dR_da = params.alpha / params.r_max;  // Rdot = (alpha/r_max) * a
  const Vec2 offset = heading_vector(state.psi + s * kPi / 2.0);
  const Vec2 offset_perp{-offset.y(), offset.x()};  // d(offset)/d(psi)
  const Vec2 q = state.position() + radius * offset - obs.position;
  const double margin = obs.radius + params.safe_radius + radius;

  CbfConstraint c;
  c.h = q.squaredNorm() - margin * margin;
  c.c_a = 2.0 * q.dot(offset) * dR_da - 2.0 * margin * dR_da;
  c.c_r = 2.0 * radius * q.dot(offset_perp);
  c.c_0 = 2.0 * q.dot(state.velocity() - obs.velocity) + params.gamma * c.h;
  return c;
}

FilterResult filter(const ControlInput& nominal, const std::vector<CbfConstraint>& constraints,
                    const TcCbfParams& params, const ShipParams& limits, double a_floor,
                    double a_ceil) {
  params.validate();
  limits.validate();
  if (!nominal.finite()) throw std::invalid_argument("filter: non-finite nominal input");
  const double a_lo = std::max(-limits.a_max, a_floor);
  const double a_hi = std::min(limits.a_max, a_ceil);
  if (!(a_lo <= a_hi)) throw std::invalid_argument("filter: empty acceleration box");

  const int m = static_cast<int>(constraints.size());
  FilterResult result;
  result.h.reserve(m);
  bool nominal_ok =
      nominal.a >= a_lo && nominal.a <= a_hi && std::abs(nominal.r) <= limits.r_max;
  for (const CbfConstraint& c : constraints) {
    if (!std::isfinite(c.c_a) || !std::isfinite(c.c_r) || !std::isfinite(c.c_0))
      throw std::invalid_argument("filter: non-finite constraint");
    result.h.push_back(c.h);
    nominal_ok = nominal_ok && c.evaluate(nominal) >= 0.0;
  }

  // Feasible nominal input passes through untouched.
  if (nominal_ok) {
    result.input = nominal;
    result.active.assign(m, false);
    return result;
  }

  DenseQp qp;
  qp.H = 2.0 * params.weight;
  qp.f = -2.0 * params.weight * Eigen::Vector2d(nominal.a, nominal.r);
  qp.A.resize(m, 2);
  qp.b.resize(m);
  for (int i = 0; i < m; ++i) {
    qp.A(i, 0) = constraints[i].c_a;
    qp.A(i, 1) = constraints[i].c_r;
    qp.b(i) = -constraints[i].c_0;
  }
  qp.lower = Eigen::Vector2d(a_lo, -limits.r_max);
  qp.upper = Eigen::Vector2d(a_hi, limits.r_max);

  QpSolution sol = solve_active_set(qp);
  if (sol.status == QpStatus::Optimal) {
    result.input = {sol.z(0), sol.z(1)};
    result.iterations = sol.iterations;
    result.active.resize(m);
    for (int i = 0; i < m; ++i) result.active[i] = sol.dual_ineq(i) > 1e-9;
    return result;
  }

  // Relaxation: one slack per barrier constraint, quadratically penalized.
  // A slack shared across rows would let every other constraint violate for
  // free once a single hopeless row sets its level; per-row slacks keep the
  // satisfiable constraints enforced while the hopeless ones degrade alone.
  //
  // The slacks are eliminated in closed form (s_i = max(0, b_i - c_i'u)),
  // leaving a strictly convex piecewise-quadratic in the two inputs. Its
  // global minimizer is found exactly by iterating on the violated set and
  // re-solving the induced 2-variable box QP; a consistent violated set
  // certifies optimality because the reduced objective is C^1.
  const double penalty = 1e6 * params.weight.cwiseAbs().maxCoeff();

  const Eigen::Vector2d u0(std::clamp(nominal.a, a_lo, a_hi),
                           std::clamp(nominal.r, -limits.r_max, limits.r_max));

  auto violated_mask = [&](const Eigen::Vector2d& point) {
    std::uint32_t mask = 0;
    for (int i = 0; i < m; ++i)
      if (qp.A.row(i).dot(point) < qp.b(i)) mask |= 1u << i;
    return mask;
  };
  auto objective = [&](const Eigen::Vector2d& point) {
    const Eigen::Vector2d d(point(0) - nominal.a, point(1) - nominal.r);
    double value = d.dot(params.weight * d);
    for (int i = 0; i < m; ++i) {
      const double shortfall = std::max(qp.b(i) - qp.A.row(i).dot(point), 0.0);
      value += penalty * shortfall * shortfall;
    }
    return value;
  };

  DenseQp reduced;
  reduced.A = Eigen::MatrixXd(0, 2);
  reduced.b = Eigen::VectorXd(0);
  reduced.lower = Eigen::Vector2d(a_lo, -limits.r_max);
  reduced.upper = Eigen::Vector2d(a_hi, limits.r_max);

  std::uint32_t mask = violated_mask(u0);
  Eigen::Vector2d best_u = u0;
  double best_value = objective(u0);
  int iterations = 0;
  for (int pass = 0; pass < m + 3; ++pass) {
    reduced.H = 2.0 * params.weight;
    reduced.f = qp.f;
    for (int i = 0; i < m; ++i) {
      if (!(mask & (1u << i))) continue;
      const Eigen::Vector2d ci = qp.A.row(i).transpose();
      reduced.H += 2.0 * penalty * ci * ci.transpose();
      reduced.f -= 2.0 * penalty * qp.b(i) * ci;
    }
    const QpSolution step = solve_active_set(reduced);
    if (step.status != QpStatus::Optimal)
      throw std::runtime_error("filter: slack-relaxed QP did not solve");
    iterations += step.iterations;
    const Eigen::Vector2d point(step.z(0), step.z(1));
    const double value = objective(point);
    if (value < best_value) {
      best_value = value;
      best_u = point;
    }
    const std::uint32_t next = violated_mask(point);
    if (next == mask) break;  // consistent violated set: global optimum
    mask = next;
  }

  result.input = {best_u(0), best_u(1)};
  result.relaxed = true;
  result.iterations = iterations;
  result.active.resize(m);
  for (int i = 0; i < m; ++i) {
    const double shortfall = qp.b(i) - qp.A.row(i).dot(best_u);
    result.slack += std::max(shortfall, 0.0);
    result.active[i] = shortfall > -1e-9 * std::max(1.0, std::abs(qp.b(i)));
  }
  return result;
}

}  // namespace colav
