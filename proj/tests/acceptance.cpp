// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Scenario directory comes in as argv[1].

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "colav/output.hpp"
#include "colav/rng.hpp"
#include "colav/simulation.hpp"

using namespace colav;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

struct MonotoneCheck {
  int increases = 0;
  int ties = 0;
};

MonotoneCheck count_increases(const std::vector<double>& v, double tie_eps) {
  MonotoneCheck c;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (std::abs(v[i + 1] - v[i]) <= tie_eps)
      ++c.ties;
    else if (v[i + 1] > v[i])
      ++c.increases;
  }
  return c;
}

// Pairwise separation bound conditioned on the step-start barrier sign, plus
// hull-collision screening; returns the number of violated (h >= 0, sep <
// o_r + R_s) rows.
int barrier_separation_violations(const RunResult& run) {
  const int n = static_cast<int>(run.config.ships.size());
  int violations = 0;
  std::vector<Vec2> pos(n);
  std::size_t idx = 0;
  while (idx + n <= run.log.rows.size()) {
    for (int i = 0; i < n; ++i) {
      const LogRow& row = run.log.rows[idx + i];
      pos[row.ship] = Vec2(row.x, row.y);
    }
    for (int i = 0; i < n; ++i) {
      const LogRow& row = run.log.rows[idx + i];
      if (run.config.ships[row.ship].controller != ControllerKind::Cbf) continue;
      for (const EncounterLogEntry& e : row.encounters) {
        if (e.h < 0.0 || !e.constrained) continue;
        const double sep = (pos[row.ship] - pos[e.traffic]).norm();
        const double bound = run.config.ships[row.ship].params.safe_radius +
                             run.config.ships[e.traffic].params.safe_radius;
        if (sep < bound * (1.0 - 1e-9)) ++violations;
      }
    }
    idx += n;
  }
  return violations;
}

struct CampaignStats {
  double avg_compute_ms = 0.0;
  double max_compute_ms = 0.0;
  int samples = 0;
};

ShipState random_state(SplitMix64& rng, double box) {
  return {rng.uniform(-box, box), rng.uniform(-box, box), rng.uniform(-kPi, kPi),
          rng.uniform(0.0, 10.0)};
}

// --- criterion implementations -------------------------------------------

void criterion_1_and_6(const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  int violations = 0, collisions = 0, aborted = 0, runs = 0;

  for (const char* name : {"scenario1", "scenario2", "headon", "overtaking", "crossing"}) {
    const RunResult run = run_scenario(load_scenario(dir / (std::string(name) + ".json")));
    ++runs;
    if (run.metrics.aborted) ++aborted;
    if (run.metrics.collision) ++collisions;
    violations += barrier_separation_violations(run);
  }

  std::map<std::string, CampaignStats> campaigns;
  for (const char* name : {"mc6", "mc8", "mc10"}) {
    const ScenarioConfig base = load_scenario(dir / (std::string(name) + ".json"));
    CampaignStats stats;
    for (int trial = 0; trial < 100; ++trial) {
      const ScenarioConfig concrete =
          materialize_monte_carlo(base, derive_seed(base.seed, trial));
      const RunResult run = run_scenario(concrete);
      ++runs;
      if (run.metrics.aborted) ++aborted;
      if (run.metrics.collision) ++collisions;
      violations += barrier_separation_violations(run);
      for (const ShipMetrics& m : run.metrics.ships) {
        if (m.controller == ControllerKind::Constant) continue;
        stats.avg_compute_ms += m.avg_compute_ms;
        stats.max_compute_ms = std::max(stats.max_compute_ms, m.max_compute_ms);
        ++stats.samples;
      }
    }
    stats.avg_compute_ms /= std::max(stats.samples, 1);
    campaigns[name] = stats;
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(1, "safety invariance",
         violations == 0 && collisions == 0 && aborted == 0 && elapsed < 300.0,
         fmt("%d runs, %d barrier-separation violations, %d collisions, %d aborted, %.1f s",
             runs, violations, collisions, aborted, elapsed));

  const CampaignStats& c6 = campaigns["mc6"];
  const CampaignStats& c10 = campaigns["mc10"];
  const double growth = (c10.avg_compute_ms - c6.avg_compute_ms) / c6.avg_compute_ms;
  const bool tails = c6.max_compute_ms < 100.0 * c6.avg_compute_ms &&
                     c10.max_compute_ms < 100.0 * c10.avg_compute_ms;
  report(6, "campaign compute-time scaling", growth < 0.5 && tails,
         fmt("avg mc6 %.4f ms -> mc10 %.4f ms (growth %.1f%%), max/avg mc6 %.0fx mc10 %.0fx",
             c6.avg_compute_ms, c10.avg_compute_ms, 100.0 * growth,
             c6.max_compute_ms / c6.avg_compute_ms, c10.max_compute_ms / c10.avg_compute_ms));
}

void criterion_2(const fs::path& dir) {
  const ScenarioConfig base = load_scenario(dir / "sweep_gamma.json");
  std::vector<double> first_turn, peak;
  for (double value : base.sweep->values) {
    const RunResult run = run_scenario(apply_sweep_value(base, value));
    double t_first = std::numeric_limits<double>::infinity();
    double r_peak = 0.0;
    bool found = false;
    for (const LogRow& row : run.log.rows) {
      if (row.ship != 0) continue;
      if (!found && std::abs(row.r) > 0.005) {
        t_first = row.t;
        found = true;
      }
      r_peak = std::max(r_peak, std::abs(row.r));
    }
    first_turn.push_back(t_first);
    peak.push_back(r_peak);
  }
  const MonotoneCheck t_check = count_increases(first_turn, 0.0);
  const MonotoneCheck p_check = count_increases(peak, 1e-9);
  std::string detail = "first-turn times:";
  for (double t : first_turn) detail += fmt(" %.0f", t);
  detail += "; peaks:";
  for (double p : peak) detail += fmt(" %.4f", p);
  report(2, "gamma-sweep trend",
         t_check.increases == 0 && t_check.ties <= 1 && p_check.increases == 0 &&
             p_check.ties <= 1,
         detail);
}

void criterion_3(const fs::path& dir) {
  const ScenarioConfig base = load_scenario(dir / "sweep_alpha.json");
  std::vector<double> seps;
  for (double value : base.sweep->values) {
    const RunResult run = run_scenario(apply_sweep_value(base, value));
    double min_sep = std::numeric_limits<double>::infinity();
    std::map<double, Vec2> own, traffic;
    for (const LogRow& row : run.log.rows)
      (row.ship == 0 ? own : traffic)[row.t] = Vec2(row.x, row.y);
    for (const auto& [t, p] : own)
      if (traffic.count(t)) min_sep = std::min(min_sep, (p - traffic[t]).norm());
    seps.push_back(min_sep);
  }
  const MonotoneCheck check = count_increases(seps, 1e-6);
  std::string detail = "min separations:";
  for (double s : seps) detail += fmt(" %.0f", s);
  report(3, "alpha-sweep trend", check.increases == 0 && check.ties <= 1, detail);
}

void criterion_4(const fs::path& dir) {
  const RunResult run = run_scenario(load_scenario(dir / "headon.json"));
  std::vector<const LogRow*> own, other;
  for (const LogRow& row : run.log.rows) (row.ship == 0 ? own : other).push_back(&row);

  double max_diff = 0.0;
  for (std::size_t i = 0; i < std::min(own.size(), other.size()); ++i) {
    max_diff = std::max(max_diff, std::abs(own[i]->a - other[i]->a));
    max_diff = std::max(max_diff, std::abs(own[i]->r - other[i]->r));
  }

  bool starboard[2] = {false, false};
  bool found[2] = {false, false};
  for (const LogRow& row : run.log.rows) {
    if (found[row.ship]) continue;
    if (std::abs(row.r - row.r_nom) > 1e-9) {
      found[row.ship] = true;
      starboard[row.ship] = row.r < row.r_nom;
    }
  }
  report(4, "head-on mirror symmetry",
         max_diff <= 1e-9 && found[0] && found[1] && starboard[0] && starboard[1],
         fmt("max mirrored input difference %.2e, first turns starboard: %s/%s", max_diff,
             starboard[0] ? "yes" : "no", starboard[1] ? "yes" : "no"));
}

void criterion_5(const fs::path& dir) {
  bool ok = true;
  std::string detail;
  for (const char* name : {"scenario1", "scenario2"}) {
    const ScenarioConfig base = load_scenario(dir / (std::string(name) + ".json"));
    double avg_ms[2] = {0, 0}, effort[2] = {0, 0}, cte[2] = {0, 0};
    const ControllerKind kinds[2] = {ControllerKind::Cbf, ControllerKind::Mpc};
    for (int c = 0; c < 2; ++c) {
      const RunResult run = run_scenario(with_controller(base, kinds[c]));
      int k = 0;
      for (const ShipMetrics& m : run.metrics.ships) {
        if (m.controller == ControllerKind::Constant) continue;
        avg_ms[c] += m.avg_compute_ms;
        effort[c] += m.control_effort;
        cte[c] += m.avg_cte;
        ++k;
      }
      avg_ms[c] /= k;
      effort[c] /= k;
      cte[c] /= k;
    }
    const bool time_ok = avg_ms[0] <= avg_ms[1] / 50.0;
    const bool effort_ok = effort[0] < effort[1];
    const bool cte_ok = cte[1] < cte[0];
    ok = ok && time_ok && effort_ok && cte_ok;
    detail += fmt("%s[time %.4f vs %.2f ms%s, effort %.2f vs %.2f%s, cte %.1f vs %.1f m%s] ",
                  name, avg_ms[0], avg_ms[1], time_ok ? "" : " !", effort[0], effort[1],
                  effort_ok ? "" : " !", cte[0], cte[1], cte_ok ? "" : " !");
  }
  report(5, "controller comparison trends", ok, detail);
}

void criterion_7() {
  // (a) affine barrier derivative vs central differences.
  SplitMix64 rng(20240817);
  int bad_fd = 0;
  const double delta = 1e-6;
  for (int trial = 0; trial < 10000; ++trial) {
    TcCbfParams p;
    p.alpha = rng.uniform(0.5, 10.0);
    p.gamma = rng.uniform(0.01, 1.0);
    p.r_max = rng.uniform(0.01, 0.1);
    p.safe_radius = rng.uniform(50.0, 500.0);
    const ShipState s = random_state(rng, 2000.0);
    const Obstacle obs{{rng.uniform(-4000, 4000), rng.uniform(-4000, 4000)},
                       {rng.uniform(-5, 5), rng.uniform(-5, 5)},
                       rng.uniform(50.0, 500.0)};
    const ControlInput in{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
    const AvoidanceDirection side =
        (rng.next() & 1) ? AvoidanceDirection::Left : AvoidanceDirection::Right;

    const CbfConstraint c = h_dot_affine(s, obs, side, p);
    const double hdot_affine = c.evaluate(in) - p.gamma * c.h;

    auto advance = [&](double dt) {
      ShipState sd = s;
      Obstacle od = obs;
      const double x = sd.x + dt * sd.u * std::cos(sd.psi);
      const double y = sd.y + dt * sd.u * std::sin(sd.psi);
      sd.psi += dt * in.r;
      sd.u += dt * in.a;
      sd.x = x;
      sd.y = y;
      od.position += dt * od.velocity;
      return h_value(sd, od, side, p);
    };
    const double hdot_fd = (advance(delta) - advance(-delta)) / (2.0 * delta);
    const double scale = std::max({1.0, std::abs(hdot_fd), std::abs(c.h) * p.gamma});
    if (std::abs(hdot_affine - hdot_fd) > 1e-5 * scale) ++bad_fd;
  }

  // (b) cross-solver agreement on random SPD instances.
  int bad_agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.next() % 5);
    const int m = static_cast<int>(rng.next() % 6);
    DenseQp qp;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = rng.uniform(-1.0, 1.0);
    qp.H = M.transpose() * M + 0.5 * Eigen::MatrixXd::Identity(n, n);
    qp.f.resize(n);
    for (int i = 0; i < n; ++i) qp.f(i) = rng.uniform(-2.0, 2.0);
    Eigen::VectorXd z0(n);
    for (int i = 0; i < n; ++i) z0(i) = rng.uniform(-1.0, 1.0);
    qp.A.resize(m, n);
    qp.b.resize(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) qp.A(i, j) = rng.uniform(-1.0, 1.0);
      qp.b(i) = qp.A.row(i).dot(z0) - rng.uniform(0.1, 1.0);
    }
    qp.lower = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    qp.upper = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    if (rng.next() & 1) {
      for (int i = 0; i < n; ++i) {
        qp.lower(i) = z0(i) - rng.uniform(0.3, 2.0);
        qp.upper(i) = z0(i) + rng.uniform(0.3, 2.0);
      }
    }
    const QpSolution exact = solve_active_set(qp);
    const QpSolution approx = solve_admm(qp);
    if (exact.status != QpStatus::Optimal || approx.status != QpStatus::Optimal ||
        std::abs(approx.objective - exact.objective) >
            1e-5 * std::max(1.0, std::abs(exact.objective)))
      ++bad_agree;
  }

  // (c) closed-form half-plane projection vs the filter.
  int bad_proj = 0;
  TcCbfParams proj_params;
  ShipParams huge;
  huge.a_max = 1e4;
  huge.r_max = 1e4;
  for (int trial = 0; trial < 1000; ++trial) {
    const ControlInput nominal{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CbfConstraint c;
    c.c_a = rng.uniform(-2, 2);
    c.c_r = rng.uniform(-2, 2);
    if (std::abs(c.c_a) + std::abs(c.c_r) < 0.5) c.c_a += 1.0;
    c.c_0 = -(c.c_a * nominal.a + c.c_r * nominal.r) - rng.uniform(0.1, 2.0);
    const FilterResult fr = filter(nominal, {c}, proj_params, huge);
    const Eigen::Vector2d cn(c.c_a, c.c_r);
    const double viol = cn.dot(Eigen::Vector2d(nominal.a, nominal.r)) + c.c_0;
    const Eigen::Vector2d expect =
        Eigen::Vector2d(nominal.a, nominal.r) - std::min(0.0, viol) * cn / cn.squaredNorm();
    if (std::abs(fr.input.a - expect(0)) > 1e-8 || std::abs(fr.input.r - expect(1)) > 1e-8)
      ++bad_proj;
  }

  // (d) RK4 against the closed-form constant-turn arc.
  int bad_rk4 = 0;
  ShipParams loose;
  loose.a_max = 1.0;
  loose.r_max = 1.0;
  loose.u_max = 20.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ShipState s{rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3), rng.uniform(-kPi, kPi),
                      rng.uniform(0.1, 10.0)};
    const double r = rng.uniform(-0.05, 0.05);
    const double dt = rng.uniform(0.05, 1.0);
    const ShipState got = step(s, {0.0, r}, dt, loose);
    double ex, ey;
    if (std::abs(r) < 1e-15) {
      ex = s.x + s.u * dt * std::cos(s.psi);
      ey = s.y + s.u * dt * std::sin(s.psi);
    } else {
      ex = s.x + s.u / r * (std::sin(s.psi + r * dt) - std::sin(s.psi));
      ey = s.y - s.u / r * (std::cos(s.psi + r * dt) - std::cos(s.psi));
    }
    if (std::hypot(got.x - ex, got.y - ey) >= 1e-6) ++bad_rk4;
  }

  report(7, "numerical kernel oracles",
         bad_fd == 0 && bad_agree == 0 && bad_proj == 0 && bad_rk4 == 0,
         fmt("fd %d/10000, solver agreement %d/1000, projection %d/1000, rk4 %d/1000 failures",
             bad_fd, bad_agree, bad_proj, bad_rk4));
}

void criterion_8() {
  SplitMix64 rng(777);
  int violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const ShipState a = random_state(rng, 5000.0);
    ShipState b = random_state(rng, 5000.0);
    if ((a.position() - b.position()).norm() < 1.0) b.x += 25.0;
    const EncounterType ab = classify(relative_geometry(a, b));
    const EncounterType ba = classify(relative_geometry(b, a));
    const bool ok = (ab == EncounterType::HeadOn && ba == EncounterType::HeadOn) ||
                    (ab == EncounterType::StarboardCrossing &&
                     ba == EncounterType::PortCrossing) ||
                    (ab == EncounterType::PortCrossing &&
                     ba == EncounterType::StarboardCrossing) ||
                    (ab == EncounterType::Overtaking && ba == EncounterType::Overtaken) ||
                    (ab == EncounterType::Overtaken && ba == EncounterType::Overtaking) ||
                    (ab == EncounterType::None && ba == EncounterType::None);
    if (!ok) ++violations;
  }
  report(8, "classification symmetry", violations == 0,
         fmt("%d violations in 10000 random geometries", violations));
}

void criterion_9() {
  MpcConfig cfg;
  cfg.horizon = 20;
  cfg.dt = 5.0;
  cfg.control_period = 5.0;
  cfg.u_ref = 5.0;
  ShipParams limits;
  limits.length = 50.0;
  limits.a_max = 0.05;
  limits.r_max = 0.05;
  limits.safe_radius = 500.0;

  // Tracking fixed point.
  MpcController tracking(cfg, limits);
  const auto hold = tracking.solve({0.0, 0.0, 0.0, cfg.u_ref}, {}, {0, 0});
  const bool fixed_point = std::abs(hold.input.a) < 1e-6 && std::abs(hold.input.r) < 1e-6;

  // Right-side obstacle dead ahead forces a starboard turn.
  MpcController avoid(cfg, limits);
  ObstacleForecast fc;
  fc.radius = 500.0;
  fc.side = AvoidanceDirection::Right;
  for (int i = 0; i <= cfg.horizon; ++i) fc.centers.push_back(Vec2(300.0, 0.0));
  const auto turn = avoid.solve({0.0, 0.0, 0.0, 5.0}, {fc}, {0, 0});
  const bool starboard = turn.input.r < 0.0;

  // Two-step horizon against an independently condensed solution.
  MpcConfig lq = cfg;
  lq.horizon = 2;
  lq.rd_weights = Eigen::Vector2d::Zero();
  lq.max_sqp_iter = 20;
  lq.qp.eps_abs = 1e-10;
  lq.qp.eps_rel = 1e-10;
  lq.qp.max_iter = 20000;
  ShipParams wide = limits;
  wide.a_max = 1e3;
  wide.r_max = 1e3;
  MpcController ctl(lq, wide);
  const PathFrameState x0{0.0, 5.0, 0.05, 5.2};
  const auto res = ctl.solve(x0, {}, {0, 0});
  const auto& xs = ctl.planned_states();
  const auto& us = ctl.planned_inputs();

  const double h = 1e-7;
  auto fd_jacobians = [&](const PathFrameState& x, const ControlInput& in, Eigen::Matrix4d& A,
                          Eigen::Matrix<double, 4, 2>& B) {
    for (int j = 0; j < 4; ++j) {
      Eigen::Vector4d vp = x.vec(), vm = x.vec();
      vp(j) += h;
      vm(j) -= h;
      A.col(j) = (path_dynamics_step(PathFrameState::from_vec(vp), in, lq.dt).vec() -
                  path_dynamics_step(PathFrameState::from_vec(vm), in, lq.dt).vec()) /
                 (2 * h);
    }
    for (int j = 0; j < 2; ++j) {
      ControlInput ip = in, im = in;
      (j == 0 ? ip.a : ip.r) += h;
      (j == 0 ? im.a : im.r) -= h;
      B.col(j) =
          (path_dynamics_step(x, ip, lq.dt).vec() - path_dynamics_step(x, im, lq.dt).vec()) /
          (2 * h);
    }
  };
  Eigen::Matrix4d A0, A1;
  Eigen::Matrix<double, 4, 2> B0, B1;
  fd_jacobians(x0, us[0], A0, B0);
  fd_jacobians(xs[0], us[1], A1, B1);
  const Eigen::Vector4d d0 = path_dynamics_step(x0, us[0], lq.dt).vec() - xs[0].vec();
  const Eigen::Vector4d d1 = path_dynamics_step(xs[0], us[1], lq.dt).vec() - xs[1].vec();
  Eigen::Matrix4d G1 = Eigen::Matrix4d::Zero();
  G1.leftCols<2>() = B0;
  Eigen::Matrix4d G2;
  G2.leftCols<2>() = A1 * B0;
  G2.rightCols<2>() = B1;
  const Eigen::Vector4d c2 = A1 * d0 + d1;
  const Eigen::Vector4d ref(0, 0, 0, lq.u_ref);
  const Eigen::Matrix4d Q = lq.q_weights.asDiagonal();
  const Eigen::Matrix4d QT = lq.qt_weights.asDiagonal();
  Eigen::Matrix4d Rbar = Eigen::Matrix4d::Zero();
  Rbar.topLeftCorner<2, 2>() = lq.r_weights.asDiagonal();
  Rbar.bottomRightCorner<2, 2>() = lq.r_weights.asDiagonal();
  Eigen::Vector4d ubar;
  ubar << us[0].a, us[0].r, us[1].a, us[1].r;
  const Eigen::Matrix4d M = Rbar + G1.transpose() * Q * G1 + G2.transpose() * QT * G2;
  const Eigen::Vector4d g = Rbar * ubar + G1.transpose() * Q * (xs[0].vec() + d0 - ref) +
                            G2.transpose() * QT * (xs[1].vec() + c2 - ref);
  const Eigen::Vector4d v = M.ldlt().solve(-g);
  const double lq_err = std::max(std::abs(res.input.a - (us[0].a + v(0))),
                                 std::abs(res.input.r - (us[0].r + v(1))));

  report(9, "mpc sanity", fixed_point && starboard && lq_err < 1e-6,
         fmt("fixed point |a|=%.1e |r|=%.1e, obstacle turn r=%+.4f, lq mismatch %.1e",
             std::abs(hold.input.a), std::abs(hold.input.r), turn.input.r, lq_err));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <scenario-dir>\n");
    return 64;
  }
  const fs::path dir = argv[1];

  criterion_1_and_6(dir);
  criterion_2(dir);
  criterion_3(dir);
  criterion_4(dir);
  criterion_5(dir);
  criterion_7();
  criterion_8();
  criterion_9();

  if (g_failures == 0)
    std::printf("all acceptance criteria passed\n");
  else
    std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
