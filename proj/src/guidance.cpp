#include "colav/guidance.hpp"

#include <stdexcept>

namespace colav {

void WaypointPath::validate() const {
  if (waypoints.size() < 2) throw std::invalid_argument("WaypointPath: need at least 2 waypoints");
  if (!(acceptance_radius > 0.0))
    throw std::invalid_argument("WaypointPath: acceptance_radius must be > 0");
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    if ((waypoints[i + 1] - waypoints[i]).norm() <= 0.0)
      throw std::invalid_argument("WaypointPath: consecutive waypoints must be distinct");
  }
}

void GuidanceGains::validate() const {
  if (kp_u < 0.0 || kd_u < 0.0 || kp_psi < 0.0 || kd_psi < 0.0)
    throw std::invalid_argument("GuidanceGains: gains must be >= 0");
  if (!(lookahead > 0.0)) throw std::invalid_argument("GuidanceGains: lookahead must be > 0");
  if (!(u_d > 0.0)) throw std::invalid_argument("GuidanceGains: u_d must be > 0");
}

double segment_course(const WaypointPath& path, std::size_t segment) {
  const Vec2 d = path.waypoints.at(segment + 1) - path.waypoints.at(segment);
  return std::atan2(d.y(), d.x());
}

double cross_track_error(const ShipState& state, const WaypointPath& path, std::size_t segment) {
  const Vec2 a = path.waypoints.at(segment);
  const Vec2 t = (path.waypoints.at(segment + 1) - a).normalized();
  return cross2(t, state.position() - a);
}

double los_heading(const ShipState& state, const WaypointPath& path, std::size_t segment,
                   double lookahead) {
  const double e = cross_track_error(state, path, segment);
  return wrap_angle(segment_course(path, segment) + std::atan2(-e, lookahead));
}

double pd_speed(double u, double u_d, const GuidanceGains& gains, double dt, PdState& history) {
  if (!(dt > 0.0)) throw std::invalid_argument("pd_speed: dt must be > 0");
  const double e = u_d - u;
  const double de = history.prev_speed_error ? (e - *history.prev_speed_error) / dt : 0.0;
  history.prev_speed_error = e;
  return gains.kp_u * e + gains.kd_u * de;
}

double pd_heading(double psi, double psi_d, const GuidanceGains& gains, double dt,
                  PdState& history) {
  if (!(dt > 0.0)) throw std::invalid_argument("pd_heading: dt must be > 0");
  const double e = wrap_angle(psi_d - psi);
  const double de = history.prev_heading_error ? (e - *history.prev_heading_error) / dt : 0.0;
  history.prev_heading_error = e;
  return gains.kp_psi * e + gains.kd_psi * de;
}

std::size_t advance_waypoint(const ShipState& state, const WaypointPath& path,
                             std::size_t active_segment) {
  std::size_t seg = active_segment;
  while (seg + 1 < path.segment_count() &&
         (path.waypoints[seg + 1] - state.position()).norm() <= path.acceptance_radius) {
    ++seg;
  }
  return seg;
}

}  // namespace colav
