#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "colav/dynamics.hpp"
#include "colav/encounter.hpp"
#include "colav/guidance.hpp"
#include "colav/mpc.hpp"
#include "colav/tccbf.hpp"

namespace colav {

enum class ControllerKind { Cbf, Mpc, Constant };

const char* to_string(ControllerKind k);

struct ShipSpec {
  std::string id;
  ControllerKind controller = ControllerKind::Cbf;
  ShipState initial;
  ShipParams params;
  GuidanceGains gains;
  WaypointPath path;
  TcCbfParams cbf;  // r_max / safe_radius mirrored from params by the loader
  MpcConfig mpc;    // control_period / u_ref filled by the loader
  std::optional<AvoidanceDirection> overtaking_side;
};

struct SweepSpec {
  std::string parameter;  // "alpha" or "gamma"
  std::vector<double> values;
};

struct MonteCarloSpec {
  int ship_count = 6;
  double circle_radius = 2000.0;
  double speed_min = 5.0;
  double speed_max = 7.0;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  double duration = 1000.0;
  double dt_sim = 1.0;
  double dt_control = 1.0;
  std::uint64_t seed = 1;
  EncounterThresholds thresholds;
  // Stand-on ships keep their barrier constraint unless disabled.
  bool standon_constraint = true;
  std::vector<ShipSpec> ships;
  std::optional<SweepSpec> sweep;
  std::optional<MonteCarloSpec> monte_carlo;

  void validate() const;  // throws std::invalid_argument
};

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::filesystem::path& file);

// Returns a copy with the swept CBF parameter replaced on every
// CBF-controlled ship.
ScenarioConfig apply_sweep_value(const ScenarioConfig& cfg, double value);

// Expands a monte-carlo template into a concrete scenario: ships placed on a
// circle with inward headings and randomized traffic speeds, all derived
// deterministically from trial_seed.
ScenarioConfig materialize_monte_carlo(const ScenarioConfig& cfg, std::uint64_t trial_seed);

// Retarget every non-constant ship to the given controller.
ScenarioConfig with_controller(const ScenarioConfig& cfg, ControllerKind kind);

}  // namespace colav
