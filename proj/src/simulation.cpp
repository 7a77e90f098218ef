#include "colav/simulation.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include "colav/rng.hpp"

namespace colav {

namespace {

using Clock = std::chrono::steady_clock;

struct ShipRuntime {
  std::size_t segment = 0;
  PdState pd;
  EncounterLatch latch;
  std::unique_ptr<MpcController> mpc;
  ControlInput applied;  // previous applied input
  // First-action bookkeeping per traffic index for the COLREGs flag.
  std::map<int, bool> action_checked;
  bool violation = false;
};

Obstacle as_obstacle(const ShipState& s, double radius) {
  return Obstacle{s.position(), s.velocity(), radius};
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg_in) {
  cfg_in.validate();
  const ScenarioConfig cfg = cfg_in.monte_carlo
                                 ? materialize_monte_carlo(cfg_in, cfg_in.seed)
                                 : cfg_in;

  const int n = static_cast<int>(cfg.ships.size());
  const int steps = static_cast<int>(std::llround(cfg.duration / cfg.dt_control));
  const int substeps = static_cast<int>(std::llround(cfg.dt_control / cfg.dt_sim));

  std::vector<ShipState> states;
  std::vector<ShipRuntime> runtime(n);
  for (int i = 0; i < n; ++i) {
    states.push_back(cfg.ships[i].initial);
    if (cfg.ships[i].controller == ControllerKind::Mpc)
      runtime[i].mpc = std::make_unique<MpcController>(cfg.ships[i].mpc, cfg.ships[i].params);
  }

  RunResult result;
  result.config = cfg;
  result.log.ship_ids.reserve(n);
  for (const ShipSpec& s : cfg.ships) result.log.ship_ids.push_back(s.id);
  result.log.rows.reserve(static_cast<std::size_t>(steps) * n);

  std::vector<ControlInput> applied(n);

  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.dt_control;
    const std::vector<ShipState> snapshot = states;

    // Controller phase against the immutable snapshot.
    for (int i = 0; i < n; ++i) {
      const ShipSpec& spec = cfg.ships[i];
      ShipRuntime& rt = runtime[i];
      LogRow row;
      row.t = t;
      row.ship = i;
      row.x = snapshot[i].x;
      row.y = snapshot[i].y;
      row.psi = snapshot[i].psi;
      row.u = snapshot[i].u;

      if (spec.controller == ControllerKind::Constant) {
        applied[i] = ControlInput{0.0, 0.0};
        row.cte = cross_track_error(snapshot[i], spec.path, rt.segment);
        result.log.rows.push_back(std::move(row));
        continue;
      }

      const auto t0 = Clock::now();

      // Encounter gating and classification, latched per traffic ship.
      std::vector<CbfConstraint> constraints;
      std::vector<int> constraint_source;
      std::vector<ObstacleForecast> forecasts;
      rt.segment = advance_waypoint(snapshot[i], spec.path, rt.segment);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const RelativeGeometry geom = relative_geometry(snapshot[i], snapshot[j]);
        const auto latched =
            rt.latch.update(j, geom, cfg.thresholds, spec.overtaking_side, t);
        if (!latched) {
          rt.action_checked.erase(j);
          continue;
        }
        EncounterLogEntry entry;
        entry.traffic = j;
        entry.type = latched->type;
        entry.direction = latched->direction;
        // PortCrossing and Overtaken are the stand-on roles; with the
        // last-resort constraint disabled they hold course and speed.
        entry.constrained = cfg.standon_constraint ||
                            (latched->type != EncounterType::PortCrossing &&
                             latched->type != EncounterType::Overtaken);
        const Obstacle obs = as_obstacle(snapshot[j], cfg.ships[j].params.safe_radius);
        if (spec.controller == ControllerKind::Cbf) {
          const CbfConstraint c = h_dot_affine(snapshot[i], obs, latched->direction, spec.cbf);
          entry.h = c.h;
          if (entry.constrained) {
            constraints.push_back(c);
            constraint_source.push_back(j);
          }
        } else {
          entry.h = h_value(snapshot[i], obs, latched->direction, spec.cbf);
          if (entry.constrained)
            forecasts.push_back(forecast_obstacle(snapshot[j], cfg.ships[j].params.safe_radius,
                                                  latched->direction, spec.path, rt.segment,
                                                  spec.mpc.horizon, spec.mpc.dt));
        }
        row.encounters.push_back(entry);
      }

      // Nominal guidance input.
      const double psi_d = los_heading(snapshot[i], spec.path, rt.segment, spec.gains.lookahead);
      const double a_n =
          pd_speed(snapshot[i].u, spec.gains.u_d, spec.gains, cfg.dt_control, rt.pd);
      const double r_n = pd_heading(snapshot[i].psi, psi_d, spec.gains, cfg.dt_control, rt.pd);
      const ControlInput nominal{a_n, r_n};

      ControlInput out;
      if (spec.controller == ControllerKind::Cbf) {
        // Acceleration bounds the speed clamps can actually realize over one
        // control period.
        const double a_floor = (spec.params.u_min - snapshot[i].u) / cfg.dt_control;
        const double a_ceil = (spec.params.u_max - snapshot[i].u) / cfg.dt_control;
        const FilterResult fr =
            filter(nominal, constraints, spec.cbf, spec.params, a_floor, a_ceil);
        out = fr.input;
        row.relaxed = fr.relaxed;
        row.slack = fr.slack;
        for (std::size_t c = 0; c < constraints.size(); ++c) {
          if (std::isnan(row.h_min) || constraints[c].h < row.h_min) row.h_min = constraints[c].h;
          // First binding step of this pair decides the action side.
          if (fr.active[c] && !rt.action_checked[constraint_source[c]]) {
            rt.action_checked[constraint_source[c]] = true;
            const double dev = out.r - nominal.r;
            const auto dir = rt.latch.active().at(constraint_source[c]).direction;
            if (std::abs(dev) > 1e-9) {
              if ((dir == AvoidanceDirection::Right && dev > 0.0) ||
                  (dir == AvoidanceDirection::Left && dev < 0.0))
                rt.violation = true;
            }
          }
        }
      } else {
        const PathFrameState x0 = to_path_frame(snapshot[i], spec.path, rt.segment);
        const MpcController::Result res = rt.mpc->solve(x0, forecasts, rt.applied);
        out = res.input;
        row.slack = res.slack_total;
        row.degraded = res.degraded;
        for (const EncounterLogEntry& e : row.encounters)
          if (std::isnan(row.h_min) || e.h < row.h_min) row.h_min = e.h;
        for (const EncounterLogEntry& e : row.encounters) {
          if (!e.constrained || rt.action_checked[e.traffic]) continue;
          const double dev = out.r - nominal.r;
          if (std::abs(dev) > 5e-3) {
            rt.action_checked[e.traffic] = true;
            if ((e.direction == AvoidanceDirection::Right && dev > 0.0) ||
                (e.direction == AvoidanceDirection::Left && dev < 0.0))
              rt.violation = true;
          }
        }
      }
      applied[i] = saturate(out, spec.params);
      rt.applied = applied[i];

      row.compute_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      row.a_nom = nominal.a;
      row.r_nom = nominal.r;
      row.a = applied[i].a;
      row.r = applied[i].r;
      row.cte = cross_track_error(snapshot[i], spec.path, rt.segment);
      result.log.rows.push_back(std::move(row));
    }

    // Integration phase.
    try {
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < substeps; ++s)
          states[i] = step(states[i], applied[i], cfg.dt_sim, cfg.ships[i].params);
    } catch (const std::exception& e) {
      result.metrics = compute_metrics(result.log, cfg);
      result.metrics.aborted = true;
      result.metrics.abort_reason = e.what();
      return result;
    }
  }

  result.metrics = compute_metrics(result.log, cfg);
  for (int i = 0; i < n; ++i)
    if (i < static_cast<int>(result.metrics.ships.size()))
      result.metrics.ships[i].colregs_violation = runtime[i].violation;
  return result;
}

MetricsReport compute_metrics(const TrajectoryLog& log, const ScenarioConfig& cfg_in) {
  const ScenarioConfig cfg = cfg_in.monte_carlo
                                 ? materialize_monte_carlo(cfg_in, cfg_in.seed)
                                 : cfg_in;
  if (log.rows.empty()) throw std::invalid_argument("compute_metrics: empty log");

  const int n = static_cast<int>(cfg.ships.size());
  MetricsReport report;
  report.scenario = cfg.name;
  report.ships.resize(n);

  std::vector<int> samples(n, 0);
  for (int i = 0; i < n; ++i) {
    report.ships[i].id = cfg.ships[i].id;
    report.ships[i].controller = cfg.ships[i].controller;
  }

  // Rows are grouped per control step.
  std::vector<Vec2> pos(n);
  std::size_t idx = 0;
  while (idx < log.rows.size()) {
    const std::size_t step_end = std::min(idx + n, log.rows.size());
    for (std::size_t r = idx; r < step_end; ++r) {
      const LogRow& row = log.rows[r];
      const int i = row.ship;
      pos[i] = Vec2(row.x, row.y);
      ShipMetrics& m = report.ships[i];
      if (cfg.ships[i].controller != ControllerKind::Constant) {
        ++samples[i];
        m.avg_compute_ms += row.compute_ms;
        m.max_compute_ms = std::max(m.max_compute_ms, row.compute_ms);
        m.avg_cte += std::abs(row.cte);
        m.max_cte = std::max(m.max_cte, std::abs(row.cte));
        m.control_effort += std::abs(row.a) + std::abs(row.r);
        if (row.relaxed) ++m.relaxed_steps;
        if (row.degraded) ++m.degraded_steps;
      }
    }
    if (step_end - idx == static_cast<std::size_t>(n)) {
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const double sep = (pos[i] - pos[j]).norm();
          report.min_separation = std::min(report.min_separation, sep);
          const double hulls = 0.5 * (cfg.ships[i].params.length + cfg.ships[j].params.length);
          if (sep < hulls) report.collision = true;
        }
      }
    }
    idx = step_end;
  }

  for (int i = 0; i < n; ++i) {
    if (samples[i] > 0) {
      report.ships[i].avg_compute_ms /= samples[i];
      report.ships[i].avg_cte /= samples[i];
    }
  }
  return report;
}

std::vector<MetricsReport> run_monte_carlo(const ScenarioConfig& cfg, int trials,
                                           std::uint64_t campaign_seed) {
  if (trials < 1) throw std::invalid_argument("run_monte_carlo: trials must be >= 1");
  std::vector<MetricsReport> reports;
  reports.reserve(trials);
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(campaign_seed, trial);
    try {
      const ScenarioConfig concrete = materialize_monte_carlo(cfg, trial_seed);
      reports.push_back(run_scenario(concrete).metrics);
    } catch (const std::exception& e) {
      MetricsReport failed;
      failed.scenario = cfg.name;
      failed.aborted = true;
      failed.abort_reason = e.what();
      reports.push_back(std::move(failed));
    }
    reports.back().scenario = cfg.name + "/trial" + std::to_string(trial);
  }
  return reports;
}

}  // namespace colav
