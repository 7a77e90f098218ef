#pragma once

#include <string>
#include <vector>

#include "colav/scenario.hpp"

namespace colav {

struct EncounterLogEntry {
  int traffic = -1;  // ship index
  EncounterType type = EncounterType::None;
  AvoidanceDirection direction = AvoidanceDirection::Right;
  double h = 0.0;           // selected-side barrier value at step start
  bool constrained = true;  // false when the stand-on constraint is disabled
};

// One control step of one ship; positions are at the step start, inputs are
// the ones applied over the step.
struct LogRow {
  double t = 0.0;
  int ship = 0;
  double x = 0.0, y = 0.0, psi = 0.0, u = 0.0;
  double a_nom = 0.0, r_nom = 0.0;
  double a = 0.0, r = 0.0;
  std::vector<EncounterLogEntry> encounters;
  double h_min = std::numeric_limits<double>::quiet_NaN();
  double slack = 0.0;
  bool relaxed = false;
  bool degraded = false;  // MPC subproblem did not converge
  double cte = 0.0;
  double compute_ms = 0.0;
};

struct TrajectoryLog {
  std::vector<std::string> ship_ids;
  std::vector<LogRow> rows;  // grouped per step, ship-major within a step
};

struct ShipMetrics {
  std::string id;
  ControllerKind controller = ControllerKind::Cbf;
  double avg_compute_ms = 0.0;
  double max_compute_ms = 0.0;
  double avg_cte = 0.0;
  double max_cte = 0.0;
  double control_effort = 0.0;
  int relaxed_steps = 0;
  int degraded_steps = 0;
  bool colregs_violation = false;
};

struct MetricsReport {
  int schema_version = 1;
  std::string scenario;
  bool collision = false;
  double min_separation = std::numeric_limits<double>::infinity();
  bool aborted = false;
  std::string abort_reason;
  std::vector<ShipMetrics> ships;
};

struct RunResult {
  TrajectoryLog log;
  MetricsReport metrics;
  ScenarioConfig config;  // the concrete (materialized) configuration that ran
};

// Fixed-step closed-loop simulation. Deterministic for a given config; a
// monte-carlo template config is first materialized from its own seed.
// Numerical failure mid-run aborts with the partial log kept and
// metrics.aborted set.
RunResult run_scenario(const ScenarioConfig& cfg);

// Runs `trials` materializations of a monte-carlo template; trial seeds are
// derived from campaign_seed. Failed trials are recorded and the campaign
// continues.
std::vector<MetricsReport> run_monte_carlo(const ScenarioConfig& cfg, int trials,
                                           std::uint64_t campaign_seed);

MetricsReport compute_metrics(const TrajectoryLog& log, const ScenarioConfig& cfg);

}  // namespace colav
