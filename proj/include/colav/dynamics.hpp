#pragma once

#include <limits>

#include "colav/geometry.hpp"

namespace colav {

// Planar kinematic state of a vessel. psi is measured CCW from the +x axis
// and is kept in (-pi, pi]; u is the forward speed and never goes negative.
struct ShipState {
  double x = 0.0;    // m
  double y = 0.0;    // m
  double psi = 0.0;  // rad
  double u = 0.0;    // m/s

  Vec2 position() const { return {x, y}; }
  Vec2 velocity() const { return u * heading_vector(psi); }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(psi) && std::isfinite(u);
  }
};

struct ControlInput {
  double a = 0.0;  // forward acceleration, m/s^2
  double r = 0.0;  // turn rate, rad/s

  bool finite() const { return std::isfinite(a) && std::isfinite(r); }
};

struct ShipStateDerivative {
  double dx = 0.0;
  double dy = 0.0;
  double dpsi = 0.0;
  double du = 0.0;
};

struct ShipParams {
  double length = 10.0;       // m
  double a_max = 0.05;        // m/s^2
  double r_max = 0.05;        // rad/s
  double safe_radius = 100.0; // m
  double u_min = 0.0;         // m/s
  double u_max = std::numeric_limits<double>::infinity();  // m/s

  void validate() const;  // throws std::invalid_argument
};

ShipStateDerivative derivative(const ShipState& state, const ControlInput& input);

// One RK4 step of the kinematics under a zero-order-hold input. Re-wraps psi
// and clamps u to [u_min, u_max]. Throws on non-finite state/input or dt <= 0.
ShipState step(const ShipState& state, const ControlInput& input, double dt,
               const ShipParams& params);

// Componentwise clamp to the actuation box. Throws on non-finite input.
ControlInput saturate(const ControlInput& input, const ShipParams& params);

}  // namespace colav
