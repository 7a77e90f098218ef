#pragma once

#include <optional>
#include <vector>

#include "colav/dynamics.hpp"

namespace colav {

struct WaypointPath {
  std::vector<Vec2> waypoints;
  double acceptance_radius = 100.0;  // m

  void validate() const;  // throws std::invalid_argument
  std::size_t segment_count() const { return waypoints.size() - 1; }
};

struct GuidanceGains {
  double kp_u = 0.1;
  double kd_u = 0.0;
  double kp_psi = 0.5;
  // Keep kd_psi strictly below 1/dt_control: at kd = 1/dt the saturated
  // discrete loop sits on a period-2 chatter boundary.
  double kd_psi = 0.5;
  double lookahead = 1000.0;  // LOS distance, m
  double u_d = 5.0;           // desired speed, m/s

  void validate() const;
};

// Backward-difference memory for the PD laws; one per controlled ship.
struct PdState {
  std::optional<double> prev_speed_error;
  std::optional<double> prev_heading_error;
};

double segment_course(const WaypointPath& path, std::size_t segment);

// Signed cross-track error to the active segment, positive to the left of the
// segment direction.
double cross_track_error(const ShipState& state, const WaypointPath& path, std::size_t segment);

// Lookahead LOS law: course + atan2(-e, lookahead), wrapped to (-pi, pi].
double los_heading(const ShipState& state, const WaypointPath& path, std::size_t segment,
                   double lookahead);

// PD speed law on e_u = u_d - u. The first call uses a zero error derivative.
// Output is unsaturated.
double pd_speed(double u, double u_d, const GuidanceGains& gains, double dt, PdState& history);

// PD heading law on the wrapped error e_psi = wrap(psi_d - psi).
double pd_heading(double psi, double psi_d, const GuidanceGains& gains, double dt,
                  PdState& history);

// Advances past segments whose end waypoint is within acceptance_radius; the
// final segment is sticky.
std::size_t advance_waypoint(const ShipState& state, const WaypointPath& path,
                             std::size_t active_segment);

}  // namespace colav
