#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "colav/output.hpp"
#include "colav/simulation.hpp"

namespace fs = std::filesystem;
using namespace colav;

namespace {

// Exit codes: 0 clean, 1 usage/config error, 2 collision, 3 solver failure.
enum ExitCode { kOk = 0, kUsage = 1, kCollision = 2, kSolverFailure = 3 };

int report_outcome(const MetricsReport& m) {
  if (m.aborted) {
    std::fprintf(stderr, "run aborted: %s\n", m.abort_reason.c_str());
    return kSolverFailure;
  }
  if (m.collision) {
    std::fprintf(stderr, "collision detected (min separation %.1f m)\n", m.min_separation);
    return kCollision;
  }
  return kOk;
}

void print_metrics_line(const MetricsReport& m) {
  std::printf("%-24s min sep %10.1f m   collision %s\n", m.scenario.c_str(),
              m.min_separation, m.collision ? "YES" : "no");
  for (const ShipMetrics& s : m.ships) {
    if (s.controller == ControllerKind::Constant) continue;
    std::printf("  %-8s %-5s avg %8.4f ms  max %8.3f ms  cte %8.1f/%8.1f m  effort %8.3f%s\n",
                s.id.c_str(), to_string(s.controller), s.avg_compute_ms, s.max_compute_ms,
                s.avg_cte, s.max_cte, s.control_effort,
                s.colregs_violation ? "  [colregs-flag]" : "");
  }
}

std::optional<ControllerKind> parse_override(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "cbf") return ControllerKind::Cbf;
  if (s == "mpc") return ControllerKind::Mpc;
  throw CLI::ValidationError("--controller must be cbf or mpc");
}

int run_simulate(const std::string& scenario_file, const std::string& controller,
                 const std::string& out_dir, std::optional<std::uint64_t> seed, bool svg,
                 double snapshot_interval) {
  ScenarioConfig cfg = load_scenario(scenario_file);
  if (seed) cfg.seed = *seed;
  if (const auto kind = parse_override(controller)) cfg = with_controller(cfg, *kind);

  OutputOptions options;
  options.svg = svg;
  options.snapshot_interval = snapshot_interval;

  int worst = kOk;
  if (cfg.sweep) {
    const SweepSpec sweep = *cfg.sweep;
    for (double value : sweep.values) {
      const ScenarioConfig swept = apply_sweep_value(cfg, value);
      const RunResult result = run_scenario(swept);
      char label[64];
      std::snprintf(label, sizeof(label), "%s_%g", sweep.parameter.c_str(), value);
      options.directory = fs::path(out_dir) / label;
      emit_outputs(result.log, result.metrics, result.config, options);
      std::printf("[%s = %g]\n", sweep.parameter.c_str(), value);
      print_metrics_line(result.metrics);
      worst = std::max(worst, report_outcome(result.metrics));
    }
    return worst;
  }

  const RunResult result = run_scenario(cfg);
  options.directory = out_dir;
  emit_outputs(result.log, result.metrics, result.config, options);
  print_metrics_line(result.metrics);
  return report_outcome(result.metrics);
}

int run_montecarlo(const std::string& scenario_file, int trials, std::uint64_t seed,
                   const std::string& out_dir) {
  const ScenarioConfig cfg = load_scenario(scenario_file);
  if (!cfg.monte_carlo)
    throw CLI::ValidationError("scenario has no monte_carlo block");

  const auto reports = run_monte_carlo(cfg, trials, seed);
  fs::create_directories(out_dir);
  write_campaign_json(reports, fs::path(out_dir) / "campaign.json");

  int collisions = 0, aborted = 0;
  double min_sep = std::numeric_limits<double>::infinity();
  double avg_ms = 0.0;
  int ships = 0;
  for (const MetricsReport& r : reports) {
    collisions += r.collision ? 1 : 0;
    aborted += r.aborted ? 1 : 0;
    min_sep = std::min(min_sep, r.min_separation);
    for (const ShipMetrics& s : r.ships)
      if (s.controller != ControllerKind::Constant) {
        avg_ms += s.avg_compute_ms;
        ++ships;
      }
  }
  std::printf("%d trials: %d collisions, %d aborted, min separation %.1f m, avg filter %.4f ms\n",
              trials, collisions, aborted, min_sep, ships ? avg_ms / ships : 0.0);
  if (aborted > 0) return kSolverFailure;
  return collisions == 0 ? kOk : kCollision;
}

int run_bench(const std::string& scenario_file, const std::string& controllers,
              const std::string& out_dir, std::optional<std::uint64_t> seed) {
  ScenarioConfig base = load_scenario(scenario_file);
  if (seed) base.seed = *seed;

  std::vector<std::string> names;
  for (std::size_t pos = 0; pos < controllers.size();) {
    const std::size_t comma = controllers.find(',', pos);
    names.push_back(controllers.substr(pos, comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }

  fs::create_directories(out_dir);
  int worst = kOk;
  std::printf("%-6s %-14s %-14s %-12s %-12s %-10s\n", "ctrl", "avg comp [ms]", "max comp [ms]",
              "avg CTE [m]", "max CTE [m]", "effort");
  for (const std::string& name : names) {
    const auto kind = parse_override(name);
    if (!kind) throw CLI::ValidationError("--controllers must list cbf and/or mpc");
    const ScenarioConfig cfg = with_controller(base, *kind);
    const RunResult result = run_scenario(cfg);

    OutputOptions options;
    options.directory = fs::path(out_dir) / name;
    emit_outputs(result.log, result.metrics, result.config, options);

    double avg_ms = 0, max_ms = 0, avg_cte = 0, max_cte = 0, effort = 0;
    int k = 0;
    for (const ShipMetrics& s : result.metrics.ships) {
      if (s.controller == ControllerKind::Constant) continue;
      avg_ms += s.avg_compute_ms;
      max_ms = std::max(max_ms, s.max_compute_ms);
      avg_cte += s.avg_cte;
      max_cte = std::max(max_cte, s.max_cte);
      effort += s.control_effort;
      ++k;
    }
    if (k > 0) {
      avg_ms /= k;
      avg_cte /= k;
      effort /= k;
    }
    std::printf("%-6s %-14.4f %-14.3f %-12.1f %-12.1f %-10.3f\n", name.c_str(), avg_ms, max_ms,
                avg_cte, max_cte, effort);
    worst = std::max(worst, report_outcome(result.metrics));
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turning-circle CBF collision avoidance toolkit"};
  app.require_subcommand(1);

  std::string scenario_file, out_dir = "out", controller, controllers = "cbf,mpc";
  std::optional<std::uint64_t> seed;
  std::uint64_t mc_seed = 1;
  int trials = 100;
  bool svg = false;
  double snapshot_interval = 200.0;

  CLI::App* sim = app.add_subcommand("simulate", "Run one scenario");
  sim->add_option("--scenario", scenario_file, "Scenario JSON file")->required();
  sim->add_option("--controller", controller, "Override controller (cbf|mpc)");
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--seed", seed, "Override the scenario seed");
  sim->add_flag("--svg", svg, "Emit a trajectory SVG");
  sim->add_option("--snapshot-interval", snapshot_interval, "SVG snapshot spacing [s]");

  CLI::App* mc = app.add_subcommand("montecarlo", "Run a randomized campaign");
  mc->add_option("--scenario", scenario_file, "Scenario JSON file (with monte_carlo block)")
      ->required();
  mc->add_option("--trials", trials, "Number of trials");
  mc->add_option("--seed", mc_seed, "Campaign seed");
  mc->add_option("--out", out_dir, "Output directory");

  CLI::App* bench = app.add_subcommand("bench", "Side-by-side controller comparison");
  bench->add_option("--scenario", scenario_file, "Scenario JSON file")->required();
  bench->add_option("--controllers", controllers, "Comma list (default cbf,mpc)");
  bench->add_option("--out", out_dir, "Output directory");
  bench->add_option("--seed", seed, "Override the scenario seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return run_simulate(scenario_file, controller, out_dir, seed, svg, snapshot_interval);
    if (mc->parsed()) return run_montecarlo(scenario_file, trials, mc_seed, out_dir);
    if (bench->parsed()) return run_bench(scenario_file, controllers, out_dir, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
