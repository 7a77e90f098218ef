#pragma once

#include <utility>
#include <vector>

#include "colav/dynamics.hpp"
#include "colav/encounter.hpp"
#include "colav/qp.hpp"

namespace colav {

struct TcCbfParams {
  double alpha = 5.0;    // turning-radius scaling, dimensionless
  double gamma = 0.02;   // class-K slope, 1/s
  double r_max = 0.05;   // rad/s
  double safe_radius = 100.0;  // own-ship safe radius R_s, m
  Eigen::Matrix2d weight = Eigen::Matrix2d::Identity();  // input-deviation weight Q

  void validate() const;
};

struct Obstacle {
  Vec2 position{0.0, 0.0};
  Vec2 velocity{0.0, 0.0};
  double radius = 100.0;  // safe radius o_r, m
};

struct TurningCircle {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;
  AvoidanceDirection side = AvoidanceDirection::Right;
};

// One barrier constraint c_a*a + c_r*r + c_0 >= 0, affine in the input.
struct CbfConstraint {
  double c_a = 0.0;
  double c_r = 0.0;
  double c_0 = 0.0;
  double h = 0.0;  // barrier value the constraint was built from

  double evaluate(const ControlInput& in) const { return c_a * in.a + c_r * in.r + c_0; }
};

// R = alpha * u / r_max: radius of the constant-rate turning circle.
double turning_radius(double u, const TcCbfParams& params);

// Centers of the right and left turning circles, offset R perpendicular to
// the heading; returned in (right, left) order.
std::pair<TurningCircle, TurningCircle> circle_centers(const ShipState& state, double radius);

// Barrier value for one side: h = |p_side - o|^2 - (o_r + R_s + R)^2.
double h_value(const ShipState& state, const Obstacle& obs, AvoidanceDirection side,
               const TcCbfParams& params);

// Coefficients of hdot + gamma*h >= 0 as an affine function of (a, r).
// The circle center moves with the ship velocity plus the R*psi_dot sweep,
// and R itself varies with acceleration through Rdot = alpha*a/r_max.
CbfConstraint h_dot_affine(const ShipState& state, const Obstacle& obs, AvoidanceDirection side,
                           const TcCbfParams& params);

struct FilterResult {
  ControlInput input;            // minimizer
  bool relaxed = false;          // true when the slack fallback was engaged
  double slack = 0.0;            // shared slack value (0 when not relaxed)
  std::vector<double> h;         // per-constraint barrier values
  std::vector<bool> active;      // per-constraint activity at the solution
  int iterations = 0;
};

// QP safety filter: min ||u - nominal||^2_Q subject to every constraint and
// the actuation box. On an infeasible constraint set the constraints are
// relaxed with one shared slack over input-normalized rows; the box stays
// hard. a_floor / a_ceil tighten the acceleration box to speed-reachable
// values ((u_min - u)/dt and (u_max - u)/dt): without them a ship sitting on
// a speed clamp can satisfy hdot through a fictitious Rdot the dynamics never
// realize. Throws std::runtime_error if the relaxed problem cannot be solved
// either.
FilterResult filter(const ControlInput& nominal, const std::vector<CbfConstraint>& constraints,
                    const TcCbfParams& params, const ShipParams& limits,
                    double a_floor = -std::numeric_limits<double>::infinity(),
                    double a_ceil = std::numeric_limits<double>::infinity());

}  // namespace colav
