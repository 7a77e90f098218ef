#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace colav {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wraps an angle to (-pi, pi]. Idempotent.
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, kTwoPi);
  if (a <= 0.0) a += kTwoPi;
  return a - kPi;
}

inline Vec2 heading_vector(double psi) { return {std::cos(psi), std::sin(psi)}; }

// z-component of t x v; positive when v points to the left of t.
inline double cross2(const Vec2& t, const Vec2& v) { return t.x() * v.y() - t.y() * v.x(); }

}  // namespace colav
