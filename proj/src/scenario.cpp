#include "colav/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "colav/rng.hpp"

namespace colav {

using nlohmann::json;

const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Cbf: return "cbf";
    case ControllerKind::Mpc: return "mpc";
    case ControllerKind::Constant: return "constant";
  }
  return "cbf";
}

namespace {

ControllerKind parse_controller(const std::string& s) {
  if (s == "cbf") return ControllerKind::Cbf;
  if (s == "mpc") return ControllerKind::Mpc;
  if (s == "constant") return ControllerKind::Constant;
  throw std::invalid_argument("scenario: unknown controller '" + s + "'");
}

AvoidanceDirection parse_direction(const std::string& s) {
  if (s == "left") return AvoidanceDirection::Left;
  if (s == "right") return AvoidanceDirection::Right;
  throw std::invalid_argument("scenario: unknown avoidance side '" + s + "'");
}

ShipSpec parse_ship(const json& j, double dt_control) {
  ShipSpec s;
  s.id = j.at("id").get<std::string>();
  s.controller = parse_controller(j.value("controller", std::string("cbf")));

  const json& init = j.at("initial");
  s.initial.x = init.at("x").get<double>();
  s.initial.y = init.at("y").get<double>();
  s.initial.psi = wrap_angle(init.at("psi").get<double>());
  s.initial.u = init.at("u").get<double>();

  const json& p = j.at("params");
  s.params.length = p.at("length").get<double>();
  s.params.a_max = p.at("a_max").get<double>();
  s.params.r_max = p.at("r_max").get<double>();
  s.params.safe_radius = p.at("safe_radius").get<double>();
  if (p.contains("u_max")) s.params.u_max = p.at("u_max").get<double>();

  if (j.contains("gains")) {
    const json& g = j.at("gains");
    s.gains.kp_u = g.value("kp_u", s.gains.kp_u);
    s.gains.kd_u = g.value("kd_u", s.gains.kd_u);
    s.gains.kp_psi = g.value("kp_psi", s.gains.kp_psi);
    s.gains.kd_psi = g.value("kd_psi", s.gains.kd_psi);
    s.gains.lookahead = g.value("lookahead", s.gains.lookahead);
    s.gains.u_d = g.value("desired_speed", s.gains.u_d);
  }
  // Speed cap defaults to 1.5x the desired speed.
  if (!p.contains("u_max")) s.params.u_max = 1.5 * s.gains.u_d;

  for (const auto& wp : j.at("waypoints"))
    s.path.waypoints.emplace_back(wp.at(0).get<double>(), wp.at(1).get<double>());
  s.path.acceptance_radius = j.value("acceptance_radius", 100.0);

  if (j.contains("cbf")) {
    const json& c = j.at("cbf");
    s.cbf.alpha = c.value("alpha", s.cbf.alpha);
    s.cbf.gamma = c.value("gamma", s.cbf.gamma);
    if (c.contains("weight")) {
      const auto w = c.at("weight").get<std::vector<double>>();
      if (w.size() != 2) throw std::invalid_argument("scenario: cbf weight must have 2 entries");
      s.cbf.weight = Eigen::Vector2d(w[0], w[1]).asDiagonal();
    }
  }
  s.cbf.r_max = s.params.r_max;
  s.cbf.safe_radius = s.params.safe_radius;

  if (j.contains("mpc")) {
    const json& m = j.at("mpc");
    s.mpc.horizon = m.value("horizon", s.mpc.horizon);
    s.mpc.dt = m.value("dt", s.mpc.dt);
    auto vec4 = [&](const char* key, Eigen::Vector4d& out) {
      if (!m.contains(key)) return;
      const auto v = m.at(key).get<std::vector<double>>();
      if (v.size() != 4) throw std::invalid_argument("scenario: mpc weight needs 4 entries");
      out = Eigen::Vector4d(v[0], v[1], v[2], v[3]);
    };
    auto vec2 = [&](const char* key, Eigen::Vector2d& out) {
      if (!m.contains(key)) return;
      const auto v = m.at(key).get<std::vector<double>>();
      if (v.size() != 2) throw std::invalid_argument("scenario: mpc weight needs 2 entries");
      out = Eigen::Vector2d(v[0], v[1]);
    };
    vec4("q", s.mpc.q_weights);
    vec2("r", s.mpc.r_weights);
    vec2("rd", s.mpc.rd_weights);
    vec4("qt", s.mpc.qt_weights);
    s.mpc.ellipse_m_factor = m.value("ellipse_m_factor", s.mpc.ellipse_m_factor);
    s.mpc.ellipse_n_factor = m.value("ellipse_n_factor", s.mpc.ellipse_n_factor);
    s.mpc.slack_weight = m.value("slack_weight", s.mpc.slack_weight);
    s.mpc.max_sqp_iter = m.value("max_sqp_iter", s.mpc.max_sqp_iter);
    s.mpc.warm_sqp_iter = m.value("warm_sqp_iter", s.mpc.warm_sqp_iter);
  }
  s.mpc.control_period = dt_control;
  s.mpc.u_ref = s.gains.u_d;

  if (j.contains("overtaking_side"))
    s.overtaking_side = parse_direction(j.at("overtaking_side").get<std::string>());
  return s;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
  const json j = json::parse(json_text);

  ScenarioConfig cfg;
  cfg.name = j.at("name").get<std::string>();
  cfg.description = j.value("description", std::string());
  cfg.duration = j.at("duration").get<double>();
  cfg.dt_sim = j.value("dt_sim", 1.0);
  cfg.dt_control = j.value("dt_control", 1.0);
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.standon_constraint = j.value("standon_constraint", true);

  const json& thr = j.at("thresholds");
  cfg.thresholds.dcpa_max = thr.at("dcpa_max").get<double>();
  cfg.thresholds.tcpa_max = thr.at("tcpa_max").get<double>();
  cfg.thresholds.dist_min = thr.at("dist_min").get<double>();

  for (const auto& ship : j.at("ships")) cfg.ships.push_back(parse_ship(ship, cfg.dt_control));

  if (j.contains("sweep")) {
    SweepSpec sweep;
    sweep.parameter = j.at("sweep").at("parameter").get<std::string>();
    sweep.values = j.at("sweep").at("values").get<std::vector<double>>();
    cfg.sweep = sweep;
  }
  if (j.contains("monte_carlo")) {
    const json& mc = j.at("monte_carlo");
    MonteCarloSpec spec;
    spec.ship_count = mc.at("ship_count").get<int>();
    spec.circle_radius = mc.at("circle_radius").get<double>();
    spec.speed_min = mc.value("speed_min", 5.0);
    spec.speed_max = mc.value("speed_max", 7.0);
    cfg.monte_carlo = spec;
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open scenario file: " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const json::exception& e) {
    throw std::runtime_error("scenario '" + file.string() + "': " + e.what());
  }
}

void ScenarioConfig::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("scenario: duration must be > 0");
  if (!(dt_sim > 0.0) || !(dt_control > 0.0))
    throw std::invalid_argument("scenario: time steps must be > 0");
  const double ratio = dt_control / dt_sim;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
    throw std::invalid_argument("scenario: dt_control must be an integer multiple of dt_sim");
  thresholds.validate();
  if (ships.empty()) throw std::invalid_argument("scenario: needs at least one ship");

  std::set<std::string> ids;
  for (const ShipSpec& s : ships) {
    if (!ids.insert(s.id).second)
      throw std::invalid_argument("scenario: duplicate ship id '" + s.id + "'");
    s.params.validate();
    s.gains.validate();
    s.path.validate();
    if (s.controller == ControllerKind::Cbf) s.cbf.validate();
    if (s.controller == ControllerKind::Mpc) s.mpc.validate();
    if (!s.initial.finite()) throw std::invalid_argument("scenario: non-finite initial state");
  }
  if (sweep) {
    if (sweep->parameter != "alpha" && sweep->parameter != "gamma")
      throw std::invalid_argument("scenario: sweep parameter must be alpha or gamma");
    if (sweep->values.empty()) throw std::invalid_argument("scenario: sweep needs values");
  }
  if (monte_carlo) {
    if (monte_carlo->ship_count < 2 || ships.size() != 1)
      throw std::invalid_argument(
          "scenario: monte_carlo needs ship_count >= 2 and exactly one template ship");
    if (!(monte_carlo->circle_radius > 0.0) ||
        !(monte_carlo->speed_min <= monte_carlo->speed_max))
      throw std::invalid_argument("scenario: bad monte_carlo geometry");
  }
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& cfg, double value) {
  ScenarioConfig out = cfg;
  out.sweep.reset();
  for (ShipSpec& s : out.ships) {
    if (s.controller != ControllerKind::Cbf) continue;
    if (cfg.sweep && cfg.sweep->parameter == "gamma")
      s.cbf.gamma = value;
    else
      s.cbf.alpha = value;
  }
  return out;
}

ScenarioConfig materialize_monte_carlo(const ScenarioConfig& cfg, std::uint64_t trial_seed) {
  if (!cfg.monte_carlo) return cfg;
  const MonteCarloSpec mc = *cfg.monte_carlo;
  const ShipSpec tmpl = cfg.ships.at(0);

  ScenarioConfig out = cfg;
  out.monte_carlo.reset();
  out.seed = trial_seed;
  out.ships.clear();

  SplitMix64 rng(trial_seed);
  const double rotation = rng.uniform(0.0, kTwoPi);
  const double spacing = kTwoPi / mc.ship_count;
  for (int k = 0; k < mc.ship_count; ++k) {
    ShipSpec s = tmpl;
    s.id = k == 0 ? tmpl.id : "t" + std::to_string(k);
    const double angle = wrap_angle(rotation + k * spacing + rng.uniform(-0.25, 0.25) * spacing);
    const Vec2 pos = mc.circle_radius * Vec2(std::cos(angle), std::sin(angle));
    // Crossing destinations scatter around the antipode so the transit lines
    // crisscross a central region instead of one focal point.
    const double exit_angle = wrap_angle(angle + kPi + rng.uniform(-0.5, 0.5));
    const Vec2 target = mc.circle_radius * Vec2(std::cos(exit_angle), std::sin(exit_angle));
    s.initial.x = pos.x();
    s.initial.y = pos.y();
    s.initial.psi = std::atan2(target.y() - pos.y(), target.x() - pos.x());  // inward
    if (k > 0) s.gains.u_d = rng.uniform(mc.speed_min, mc.speed_max);
    s.initial.u = s.gains.u_d;
    s.params.u_max = 1.5 * s.gains.u_d;
    s.mpc.u_ref = s.gains.u_d;
    s.path.waypoints = {pos, target};
    out.ships.push_back(std::move(s));
  }
  return out;
}

ScenarioConfig with_controller(const ScenarioConfig& cfg, ControllerKind kind) {
  ScenarioConfig out = cfg;
  for (ShipSpec& s : out.ships)
    if (s.controller != ControllerKind::Constant) s.controller = kind;
  return out;
}

}  // namespace colav
