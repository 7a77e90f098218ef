#include "colav/dynamics.hpp"

#include <algorithm>
#include <stdexcept>

namespace colav {

void ShipParams::validate() const {
  if (!(length > 0.0)) throw std::invalid_argument("ShipParams: length must be > 0");
  if (!(a_max > 0.0)) throw std::invalid_argument("ShipParams: a_max must be > 0");
  if (!(r_max > 0.0)) throw std::invalid_argument("ShipParams: r_max must be > 0");
  if (!(safe_radius > 0.0)) throw std::invalid_argument("ShipParams: safe_radius must be > 0");
  if (!(u_min >= 0.0) || !(u_max > u_min))
    throw std::invalid_argument("ShipParams: need 0 <= u_min < u_max");
}

ShipStateDerivative derivative(const ShipState& state, const ControlInput& input) {
  return {state.u * std::cos(state.psi), state.u * std::sin(state.psi), input.r, input.a};
}

namespace {

ShipState euler_blend(const ShipState& s, const ShipStateDerivative& k, double h) {
  return {s.x + h * k.dx, s.y + h * k.dy, s.psi + h * k.dpsi, s.u + h * k.du};
}

}  // namespace

ShipState step(const ShipState& state, const ControlInput& input, double dt,
               const ShipParams& params) {
  if (!state.finite() || !input.finite())
    throw std::invalid_argument("step: non-finite state or input");
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");

  const ShipStateDerivative k1 = derivative(state, input);
  const ShipStateDerivative k2 = derivative(euler_blend(state, k1, 0.5 * dt), input);
  const ShipStateDerivative k3 = derivative(euler_blend(state, k2, 0.5 * dt), input);
  const ShipStateDerivative k4 = derivative(euler_blend(state, k3, dt), input);

  ShipState out;
  out.x = state.x + dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  out.y = state.y + dt / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
  out.psi = wrap_angle(state.psi + dt / 6.0 * (k1.dpsi + 2.0 * k2.dpsi + 2.0 * k3.dpsi + k4.dpsi));
  out.u = std::clamp(state.u + dt / 6.0 * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du),
                     params.u_min, params.u_max);
  return out;
}

ControlInput saturate(const ControlInput& input, const ShipParams& params) {
  if (!input.finite()) throw std::invalid_argument("saturate: non-finite input");
  return {std::clamp(input.a, -params.a_max, params.a_max),
          std::clamp(input.r, -params.r_max, params.r_max)};
}

}  // namespace colav
