#pragma once

#include <map>
#include <optional>

#include "colav/dynamics.hpp"

namespace colav {

enum class EncounterType { HeadOn, StarboardCrossing, PortCrossing, Overtaking, Overtaken, None };
enum class AvoidanceDirection { Left, Right };

const char* to_string(EncounterType t);

struct EncounterThresholds {
  double dcpa_max = 1500.0;  // m
  double tcpa_max = 1000.0;  // s
  double dist_min = 5000.0;  // m

  void validate() const;
};

// Pairwise geometry between an own ship and one traffic ship. Bearings are
// CCW-positive in the x-y plane and wrapped to (-pi, pi]; beta_to is the
// mirrored bearing (own ship seen from the traffic ship's frame), carried so
// classification can be made symmetric.
struct RelativeGeometry {
  double psi_ot = 0.0;   // relative heading, rad
  double beta_ot = 0.0;  // bearing of traffic from own, rad
  double beta_to = 0.0;  // bearing of own from traffic, rad
  double distance = 0.0; // m
  double dcpa = 0.0;     // m
  double tcpa = 0.0;     // s, negative when diverging
  double u_own = 0.0;    // m/s
  double u_traffic = 0.0;
};

struct CpaResult {
  double dcpa = 0.0;
  double tcpa = 0.0;
};

// Closest point of approach under constant velocities. tcpa is reported
// unclamped (negative = diverging); dcpa is the separation at max(tcpa, 0).
// Near-zero relative speed (|v| <= 1e-9) yields tcpa = 0, dcpa = |p|.
CpaResult cpa(const ShipState& own, const ShipState& traffic);

// Throws std::invalid_argument for co-located ships.
RelativeGeometry relative_geometry(const ShipState& own, const ShipState& traffic);

bool is_encounter(const RelativeGeometry& geom, const EncounterThresholds& thr);

// COLREGs encounter type from pairwise geometry. The sector tests use both
// ships' bearings so that classify(own,traffic) and classify(traffic,own)
// always form a consistent pair (HeadOn<->HeadOn, StarboardCrossing<->
// PortCrossing, Overtaking<->Overtaken, None<->None).
EncounterType classify(const RelativeGeometry& geom);

// Side on which the traffic ship is to be avoided; Right selects the
// right-turning-circle constraint. Default mapping is Right for every type;
// overtaking_override can flip Overtaking to Left. Throws on None.
AvoidanceDirection avoidance_direction(
    EncounterType t, std::optional<AvoidanceDirection> overtaking_override = std::nullopt);

struct LatchedEncounter {
  EncounterType type = EncounterType::None;
  AvoidanceDirection direction = AvoidanceDirection::Right;
  double since = 0.0;  // s, gate-onset time
};

// Per-own-ship latch table. An encounter's type and direction are frozen at
// gate onset and held until the gate drops, so the commanded side cannot flip
// mid-maneuver. Traffic ships that gate as encounters but fall outside every
// sector latch as type None with the Right (catch-all) direction.
class EncounterLatch {
 public:
  std::optional<LatchedEncounter> update(int traffic_id, const RelativeGeometry& geom,
                                         const EncounterThresholds& thr,
                                         std::optional<AvoidanceDirection> overtaking_override,
                                         double t);
  const std::map<int, LatchedEncounter>& active() const { return latched_; }
  void clear() { latched_.clear(); }

 private:
  std::map<int, LatchedEncounter> latched_;
};

}  // namespace colav
