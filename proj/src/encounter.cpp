#include "colav/encounter.hpp"

#include <stdexcept>

namespace colav {

namespace {
constexpr double kRelSpeedEps = 1e-9;                 // m/s
constexpr double kHeadOnHalfWidth = 22.5 * kPi / 180.0;
constexpr double kCrossingMax = 112.5 * kPi / 180.0;  // bow-sector edge
constexpr double kSternMin = 112.5 * kPi / 180.0;     // stern-sector edge
}  // namespace

const char* to_string(EncounterType t) {
  switch (t) {
    case EncounterType::HeadOn: return "HeadOn";
    case EncounterType::StarboardCrossing: return "StarboardCrossing";
    case EncounterType::PortCrossing: return "PortCrossing";
    case EncounterType::Overtaking: return "Overtaking";
    case EncounterType::Overtaken: return "Overtaken";
    case EncounterType::None: return "None";
  }
  return "None";
}

void EncounterThresholds::validate() const {
  if (!(dcpa_max > 0.0) || !(tcpa_max > 0.0) || !(dist_min > 0.0))
    throw std::invalid_argument("EncounterThresholds: all thresholds must be > 0");
}

CpaResult cpa(const ShipState& own, const ShipState& traffic) {
  const Vec2 p = traffic.position() - own.position();
  const Vec2 v = traffic.velocity() - own.velocity();
  const double v2 = v.squaredNorm();
  if (v2 <= kRelSpeedEps * kRelSpeedEps) return {p.norm(), 0.0};
  const double tcpa = -p.dot(v) / v2;
  const double dcpa = (p + v * std::max(tcpa, 0.0)).norm();
  return {dcpa, tcpa};
}

RelativeGeometry relative_geometry(const ShipState& own, const ShipState& traffic) {
  const Vec2 d = traffic.position() - own.position();
  if (d.norm() <= 0.0) throw std::invalid_argument("relative_geometry: ships are co-located");

  RelativeGeometry g;
  g.psi_ot = wrap_angle(traffic.psi - own.psi);
  g.beta_ot = wrap_angle(std::atan2(d.y(), d.x()) - own.psi);
  g.beta_to = wrap_angle(std::atan2(-d.y(), -d.x()) - traffic.psi);
  g.distance = d.norm();
  const CpaResult c = cpa(own, traffic);
  g.dcpa = c.dcpa;
  g.tcpa = c.tcpa;
  g.u_own = own.u;
  g.u_traffic = traffic.u;
  return g;
}

bool is_encounter(const RelativeGeometry& geom, const EncounterThresholds& thr) {
  const bool cpa_gate =
      geom.tcpa >= 0.0 && geom.tcpa <= thr.tcpa_max && geom.dcpa <= thr.dcpa_max;
  return cpa_gate || geom.distance <= thr.dist_min;
}

EncounterType classify(const RelativeGeometry& g) {
  const bool reciprocal = std::abs(wrap_angle(g.psi_ot - kPi)) <= kHeadOnHalfWidth;
  if (reciprocal && std::abs(g.beta_ot) <= kHeadOnHalfWidth &&
      std::abs(g.beta_to) <= kHeadOnHalfWidth)
    return EncounterType::HeadOn;

  // Stern-sector tests; the strict speed inequality keeps the pair exclusive.
  if (std::abs(g.beta_to) >= kSternMin && g.u_own > g.u_traffic) return EncounterType::Overtaking;
  if (std::abs(g.beta_ot) >= kSternMin && g.u_traffic > g.u_own) return EncounterType::Overtaken;

  if (g.psi_ot < -kHeadOnHalfWidth && g.beta_ot >= 0.0 && g.beta_ot < kCrossingMax &&
      g.beta_to <= 0.0 && g.beta_to > -kCrossingMax)
    return EncounterType::StarboardCrossing;
  if (g.psi_ot > kHeadOnHalfWidth && g.beta_ot <= 0.0 && g.beta_ot > -kCrossingMax &&
      g.beta_to >= 0.0 && g.beta_to < kCrossingMax)
    return EncounterType::PortCrossing;

  return EncounterType::None;
}

AvoidanceDirection avoidance_direction(EncounterType t,
                                       std::optional<AvoidanceDirection> overtaking_override) {
  if (t == EncounterType::None)
    throw std::invalid_argument("avoidance_direction: encounter type is None");
  if (t == EncounterType::Overtaking && overtaking_override) return *overtaking_override;
  return AvoidanceDirection::Right;
}

std::optional<LatchedEncounter> EncounterLatch::update(
    int traffic_id, const RelativeGeometry& geom, const EncounterThresholds& thr,
    std::optional<AvoidanceDirection> overtaking_override, double t) {
  auto it = latched_.find(traffic_id);
  if (it != latched_.end()) {
    // Exit hysteresis: an active encounter only releases once the gate is
    // clear by a margin, so mid-maneuver threshold flicker cannot drop and
    // re-latch the pair with a flipped direction.
    EncounterThresholds exit = thr;
    exit.dcpa_max *= 1.5;
    exit.tcpa_max *= 1.5;
    exit.dist_min *= 1.5;
    if (is_encounter(geom, exit)) return it->second;
    latched_.erase(it);
    return std::nullopt;
  }
  if (!is_encounter(geom, thr)) return std::nullopt;

  LatchedEncounter e;
  e.type = classify(geom);
  e.direction = e.type == EncounterType::None
                    ? AvoidanceDirection::Right
                    : avoidance_direction(e.type, overtaking_override);
  e.since = t;
  latched_.emplace(traffic_id, e);
  return e;
}

}  // namespace colav
