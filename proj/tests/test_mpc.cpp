#include <doctest.h>

#include <cmath>

#include "colav/dynamics.hpp"
#include "colav/mpc.hpp"
#include "colav/rng.hpp"

using namespace colav;

namespace {

WaypointPath path_along(double course, const Vec2& start = {0.0, 0.0}, double len = 20000.0) {
  WaypointPath p;
  p.waypoints = {start, start + len * Vec2(std::cos(course), std::sin(course))};
  p.acceptance_radius = 100.0;
  return p;
}

MpcConfig small_config() {
  MpcConfig cfg;
  cfg.horizon = 10;
  cfg.dt = 5.0;
  cfg.control_period = 5.0;
  cfg.u_ref = 5.0;
  return cfg;
}

ShipParams wide_limits() {
  ShipParams p;
  p.length = 50.0;
  p.a_max = 0.05;
  p.r_max = 0.05;
  p.safe_radius = 500.0;
  return p;
}

}  // namespace

TEST_CASE("to_path_frame") {
  const WaypointPath p = path_along(0.0);
  PathFrameState x = to_path_frame({0, 0, 0, 5}, p, 0);
  CHECK(x.d == doctest::Approx(0.0));
  CHECK(x.e == doctest::Approx(0.0));
  CHECK(x.psi_e == doctest::Approx(0.0));
  CHECK(x.u == 5.0);

  x = to_path_frame({10, -5, 0, 5}, p, 0);
  CHECK(x.d == doctest::Approx(10.0));
  CHECK(x.e == doctest::Approx(-5.0));

  const WaypointPath north = path_along(kPi / 2.0);
  x = to_path_frame({-3, 7, kPi, 5}, north, 0);
  CHECK(x.d == doctest::Approx(7.0));
  CHECK(x.e == doctest::Approx(3.0));
  CHECK(x.psi_e == doctest::Approx(kPi / 2.0));
}

TEST_CASE("path_dynamics_step basics") {
  PathFrameState x{0, 0, 0, 5};
  PathFrameState y = path_dynamics_step(x, {0, 0}, 2.0);
  CHECK(y.d == doctest::Approx(10.0));
  CHECK(y.e == doctest::Approx(0.0));

  x = {0, 0, kPi / 2, 5};
  y = path_dynamics_step(x, {0, 0}, 2.0);
  CHECK(y.e == doctest::Approx(10.0));
  CHECK(y.d == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("path dynamics match world dynamics through the frame maps") {
  ShipParams limits = wide_limits();
  limits.u_max = 50.0;
  SplitMix64 rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const double course = rng.uniform(-kPi, kPi);
    const Vec2 start{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    const WaypointPath p = path_along(course, start);
    const ShipState w0{start.x() + rng.uniform(-50, 50), start.y() + rng.uniform(-50, 50),
                       rng.uniform(-kPi, kPi), rng.uniform(0.5, 10.0)};
    const ControlInput in{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
    const double dt = rng.uniform(0.2, 5.0);

    const PathFrameState via_path = path_dynamics_step(to_path_frame(w0, p, 0), in, dt);
    const PathFrameState via_world = to_path_frame(step(w0, in, dt, limits), p, 0);
    CHECK(std::abs(via_path.d - via_world.d) < 1e-9 * std::max(1.0, std::abs(via_world.d)));
    CHECK(std::abs(via_path.e - via_world.e) < 1e-9 * std::max(1.0, std::abs(via_world.e)));
    CHECK(std::abs(wrap_angle(via_path.psi_e - via_world.psi_e)) < 1e-9);
    CHECK(std::abs(via_path.u - via_world.u) < 1e-12);
  }
}

TEST_CASE("path_dynamics_jacobians agree with finite differences") {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const PathFrameState x{rng.uniform(-100, 100), rng.uniform(-100, 100),
                           rng.uniform(-1.0, 1.0), rng.uniform(0.5, 10.0)};
    const ControlInput in{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
    const double dt = rng.uniform(1.0, 15.0);
    Eigen::Matrix4d A;
    Eigen::Matrix<double, 4, 2> B;
    path_dynamics_jacobians(x, in, dt, A, B);

    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      Eigen::Vector4d vp = x.vec(), vm = x.vec();
      vp(j) += h;
      vm(j) -= h;
      const Eigen::Vector4d col =
          (path_dynamics_step(PathFrameState::from_vec(vp), in, dt).vec() -
           path_dynamics_step(PathFrameState::from_vec(vm), in, dt).vec()) /
          (2 * h);
      CHECK((A.col(j) - col).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, col.norm()));
    }
    for (int j = 0; j < 2; ++j) {
      ControlInput ip = in, im = in;
      (j == 0 ? ip.a : ip.r) += h;
      (j == 0 ? im.a : im.r) -= h;
      const Eigen::Vector4d col =
          (path_dynamics_step(x, ip, dt).vec() - path_dynamics_step(x, im, dt).vec()) / (2 * h);
      CHECK((B.col(j) - col).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, col.norm()));
    }
  }
}

TEST_CASE("ellipse_residual geometry") {
  const double o_r = 500.0;
  const double m = 1.5 * o_r, n = 4.0 * o_r;
  const Vec2 center{5000.0, 0.0};

  // At the shifted center of the right-side ellipse the residual is -1.
  PathFrameState x;
  x.d = center.x();
  x.e = center.y() + 2.0 * o_r - m;
  CHECK(ellipse_residual(x, center, o_r, AvoidanceDirection::Right, m, n) ==
        doctest::Approx(-1.0));

  // (o_d, o_e + 2 o_r) lies on the right-side ellipse boundary.
  x.e = center.y() + 2.0 * o_r;
  CHECK(ellipse_residual(x, center, o_r, AvoidanceDirection::Right, m, n) ==
        doctest::Approx(0.0).epsilon(1e-12));

  // Far field.
  x.d = center.x() + 1e7;
  CHECK(ellipse_residual(x, center, o_r, AvoidanceDirection::Right, m, n) > 1e6);

  // The two sides shift the blocked region to opposite flanks.
  PathFrameState on_center;
  on_center.d = center.x();
  on_center.e = center.y();
  const Vec2 gr = ellipse_gradient(on_center, center, o_r, AvoidanceDirection::Right, m, n);
  const Vec2 gl = ellipse_gradient(on_center, center, o_r, AvoidanceDirection::Left, m, n);
  CHECK(gr.y() < 0.0);  // right-side avoidance pushes e down
  CHECK(gl.y() > 0.0);
}

TEST_CASE("forecast_obstacle maps constant-velocity motion into the frame") {
  const WaypointPath p = path_along(0.0);
  const ShipState traffic{1000.0, 50.0, 0.0, 3.0};
  const ObstacleForecast fc =
      forecast_obstacle(traffic, 250.0, AvoidanceDirection::Right, p, 0, 5, 10.0);
  REQUIRE(fc.centers.size() == 6);
  for (int i = 0; i <= 5; ++i) {
    CHECK(fc.centers[i].x() == doctest::Approx(1000.0 + 30.0 * i));
    CHECK(fc.centers[i].y() == doctest::Approx(50.0));
  }
}

TEST_CASE("mpc holds the tracking fixed point with near-zero input") {
  MpcConfig cfg = small_config();
  MpcController ctl(cfg, wide_limits());
  const PathFrameState x0{0.0, 0.0, 0.0, cfg.u_ref};
  const auto res = ctl.solve(x0, {}, {0.0, 0.0});
  CHECK(std::abs(res.input.a) < 1e-6);
  CHECK(std::abs(res.input.r) < 1e-6);
  CHECK_FALSE(res.degraded);
}

TEST_CASE("mpc turns away from an obstacle on the commanded side") {
  MpcConfig cfg = small_config();
  cfg.horizon = 20;
  const ShipParams limits = wide_limits();

  for (const AvoidanceDirection side : {AvoidanceDirection::Right, AvoidanceDirection::Left}) {
    MpcController ctl(cfg, limits);
    const PathFrameState x0{0.0, 0.0, 0.0, 5.0};
    ObstacleForecast fc;
    fc.radius = 500.0;
    fc.side = side;
    for (int i = 0; i <= cfg.horizon; ++i) fc.centers.push_back(Vec2(300.0, 0.0));
    const auto res = ctl.solve(x0, {fc}, {0.0, 0.0});
    if (side == AvoidanceDirection::Right) {
      CHECK(res.input.r < 0.0);
    } else {
      CHECK(res.input.r > 0.0);
    }
  }
}

TEST_CASE("mpc matches an independently condensed LQ solution at convergence") {
  MpcConfig cfg;
  cfg.horizon = 2;
  cfg.dt = 5.0;
  cfg.control_period = 5.0;
  cfg.u_ref = 5.0;
  cfg.rd_weights = Eigen::Vector2d::Zero();
  cfg.max_sqp_iter = 20;
  cfg.qp.eps_abs = 1e-10;
  cfg.qp.eps_rel = 1e-10;
  cfg.qp.max_iter = 20000;
  ShipParams limits = wide_limits();
  limits.a_max = 1e3;  // keep the box inactive
  limits.r_max = 1e3;

  MpcController ctl(cfg, limits);
  const PathFrameState x0{0.0, 5.0, 0.05, 5.2};
  const auto res = ctl.solve(x0, {}, {0.0, 0.0});

  const auto& xs = ctl.planned_states();
  const auto& us = ctl.planned_inputs();
  REQUIRE(xs.size() == 2);
  REQUIRE(us.size() == 2);

  // Independent route: finite-difference jacobians, condensation by
  // substitution, dense normal-equation solve.
  const double h = 1e-7;
  auto fd_jacobians = [&](const PathFrameState& x, const ControlInput& in, Eigen::Matrix4d& A,
                          Eigen::Matrix<double, 4, 2>& B) {
    for (int j = 0; j < 4; ++j) {
      Eigen::Vector4d vp = x.vec(), vm = x.vec();
      vp(j) += h;
      vm(j) -= h;
      A.col(j) = (path_dynamics_step(PathFrameState::from_vec(vp), in, cfg.dt).vec() -
                  path_dynamics_step(PathFrameState::from_vec(vm), in, cfg.dt).vec()) /
                 (2 * h);
    }
    for (int j = 0; j < 2; ++j) {
      ControlInput ip = in, im = in;
      (j == 0 ? ip.a : ip.r) += h;
      (j == 0 ? im.a : im.r) -= h;
      B.col(j) =
          (path_dynamics_step(x, ip, cfg.dt).vec() - path_dynamics_step(x, im, cfg.dt).vec()) /
          (2 * h);
    }
  };

  Eigen::Matrix4d A0, A1;
  Eigen::Matrix<double, 4, 2> B0, B1;
  fd_jacobians(x0, us[0], A0, B0);
  fd_jacobians(xs[0], us[1], A1, B1);
  const Eigen::Vector4d d0 = path_dynamics_step(x0, us[0], cfg.dt).vec() - xs[0].vec();
  const Eigen::Vector4d d1 = path_dynamics_step(xs[0], us[1], cfg.dt).vec() - xs[1].vec();

  // delta_x1 = G1 v + d0, delta_x2 = G2 v + c2 with v = (du0, du1).
  Eigen::Matrix<double, 4, 4> G1 = Eigen::Matrix<double, 4, 4>::Zero();
  G1.leftCols<2>() = B0;
  Eigen::Matrix<double, 4, 4> G2;
  G2.leftCols<2>() = A1 * B0;
  G2.rightCols<2>() = B1;
  const Eigen::Vector4d c2 = A1 * d0 + d1;

  const Eigen::Vector4d ref(0, 0, 0, cfg.u_ref);
  const Eigen::Matrix4d Q = cfg.q_weights.asDiagonal();
  const Eigen::Matrix4d QT = cfg.qt_weights.asDiagonal();
  Eigen::Matrix4d Rbar = Eigen::Matrix4d::Zero();
  Rbar.topLeftCorner<2, 2>() = cfg.r_weights.asDiagonal();
  Rbar.bottomRightCorner<2, 2>() = cfg.r_weights.asDiagonal();
  Eigen::Vector4d ubar;
  ubar << us[0].a, us[0].r, us[1].a, us[1].r;

  const Eigen::Matrix4d M = Rbar + G1.transpose() * Q * G1 + G2.transpose() * QT * G2;
  const Eigen::Vector4d g = Rbar * ubar + G1.transpose() * Q * (xs[0].vec() + d0 - ref) +
                            G2.transpose() * QT * (xs[1].vec() + c2 - ref);
  const Eigen::Vector4d v = M.ldlt().solve(-g);

  CHECK(v.cwiseAbs().maxCoeff() < 1e-6);  // the SQP really converged
  CHECK(std::abs(res.input.a - (us[0].a + v(0))) < 1e-6);
  CHECK(std::abs(res.input.r - (us[0].r + v(1))) < 1e-6);
}

TEST_CASE("shifted warm start does not lose ground to a cold start") {
  MpcConfig cfg = small_config();
  cfg.horizon = 15;
  const ShipParams limits = wide_limits();

  ObstacleForecast fc;
  fc.radius = 400.0;
  fc.side = AvoidanceDirection::Right;
  for (int i = 0; i <= cfg.horizon; ++i) fc.centers.push_back(Vec2(2500.0, 100.0));

  MpcController warm(cfg, limits);
  PathFrameState x{0.0, 150.0, -0.05, 5.0};
  auto res = warm.solve(x, {fc}, {0, 0});
  // March a few control periods so the shift path is exercised.
  ControlInput applied = res.input;
  for (int step = 0; step < 3; ++step) {
    x = path_dynamics_step(x, applied, cfg.control_period);
    res = warm.solve(x, {fc}, applied);
    applied = res.input;
  }
  x = path_dynamics_step(x, applied, cfg.control_period);
  const auto warm_res = warm.solve(x, {fc}, applied);

  MpcConfig cold_cfg = cfg;
  cold_cfg.max_sqp_iter = 1;
  MpcController cold(cold_cfg, limits);
  const auto cold_res = cold.solve(x, {fc}, applied);

  CHECK(warm_res.merit <= cold_res.merit + 1e-9);
}

TEST_CASE("mpc rejects malformed inputs") {
  MpcConfig cfg = small_config();
  MpcController ctl(cfg, wide_limits());
  ObstacleForecast bad;
  bad.radius = 100.0;
  bad.centers.resize(3);  // wrong length
  CHECK_THROWS(ctl.solve({0, 0, 0, 5}, {bad}, {0, 0}));
  CHECK_THROWS(ctl.solve({std::nan(""), 0, 0, 5}, {}, {0, 0}));
}
