#pragma once

#include <vector>

#include "colav/dynamics.hpp"
#include "colav/encounter.hpp"
#include "colav/guidance.hpp"
#include "colav/qp.hpp"

namespace colav {

// State in the waypoint-path coordinate frame: along-path distance d,
// cross-track error e (left positive), heading error psi_e, forward speed u.
struct PathFrameState {
  double d = 0.0;
  double e = 0.0;
  double psi_e = 0.0;
  double u = 0.0;

  Eigen::Vector4d vec() const { return {d, e, psi_e, u}; }
  static PathFrameState from_vec(const Eigen::Vector4d& v) {
    return {v(0), v(1), wrap_angle(v(2)), v(3)};
  }
};

struct MpcConfig {
  int horizon = 40;     // N
  double dt = 15.0;     // prediction sampling time, s
  double control_period = 15.0;  // how often solve() is called, s
  double u_ref = 5.0;   // reference speed for the tracking cost, m/s

  Eigen::Vector4d q_weights{0.0, 1e-3, 1e-1, 1.0};   // Q diag on [d, e, psi_e, u]
  Eigen::Vector2d r_weights{10.0, 1e3};              // R diag on [a, r]
  Eigen::Vector2d rd_weights{10.0, 1e3};             // R_d diag on input rate
  Eigen::Vector4d qt_weights{0.0, 1e-2, 1.0, 10.0};  // terminal Q_T diag

  // Avoidance ellipse semi-axes as multiples of the obstacle safe radius.
  // The cross-track semi-axis factor must stay in (1.5, 2) so the shifted
  // ellipse both covers the obstacle disk and keeps a side preference.
  double ellipse_m_factor = 1.5;
  double ellipse_n_factor = 4.0;
  double slack_weight = 1e4;  // L1 and L2 penalty on ellipse slacks

  int max_sqp_iter = 5;   // cold start
  int warm_sqp_iter = 1;  // real-time iteration once warm
  AdmmSettings qp = default_subproblem_settings();

  // Loose splitting tolerance with polish on: the subproblem iterates fast
  // and the exact KKT re-solve restores accuracy.
  static AdmmSettings default_subproblem_settings();

  void validate() const;
};

// Per-obstacle forecast over the horizon: path-frame centers at steps 0..N.
struct ObstacleForecast {
  std::vector<Vec2> centers;  // (o_d, o_e), size horizon + 1
  double radius = 100.0;      // o_r
  AvoidanceDirection side = AvoidanceDirection::Right;
};

// Path-frame projection against the active segment; d accumulates the
// arclength of previous segments plus the (unclamped) projection onto the
// active one.
PathFrameState to_path_frame(const ShipState& state, const WaypointPath& path,
                             std::size_t segment);

// (d, e) coordinates of a bare point in the same frame.
Vec2 path_frame_point(const WaypointPath& path, std::size_t segment, const Vec2& p);

// Constant-velocity extrapolation of a traffic ship mapped into the path
// frame, one center per horizon step.
ObstacleForecast forecast_obstacle(const ShipState& traffic, double obstacle_radius,
                                   AvoidanceDirection side, const WaypointPath& path,
                                   std::size_t segment, int horizon, double dt);

// RK4 step of dd = u cos(psi_e), de = u sin(psi_e), dpsi_e = r, du = a.
PathFrameState path_dynamics_step(const PathFrameState& x, const ControlInput& in, double dt);

// Exact discrete-time sensitivities of path_dynamics_step, chained through
// the RK4 stages.
void path_dynamics_jacobians(const PathFrameState& x, const ControlInput& in, double dt,
                             Eigen::Matrix4d& A, Eigen::Matrix<double, 4, 2>& B);

// Ellipse avoidance residual, >= 0 when clear. The ellipse center is shifted
// off the obstacle toward the forbidden side: left-side avoidance blocks the
// right flank and vice versa.
double ellipse_residual(const PathFrameState& x, const Vec2& center, double o_r,
                        AvoidanceDirection side, double m, double n);

// d(residual)/d(d, e).
Vec2 ellipse_gradient(const PathFrameState& x, const Vec2& center, double o_r,
                      AvoidanceDirection side, double m, double n);

// Receding-horizon tracking controller with softened ellipse constraints.
// Owns its linearization trajectory and QP warm start between calls.
class MpcController {
 public:
  MpcController(const MpcConfig& cfg, const ShipParams& limits);

  struct Result {
    ControlInput input;
    bool degraded = false;  // subproblem or SQP did not fully converge
    int sqp_iterations = 0;
    int qp_iterations = 0;
    double slack_total = 0.0;
    double merit = 0.0;  // nonlinear cost + constraint-violation penalty
  };

  Result solve(const PathFrameState& x0, const std::vector<ObstacleForecast>& forecasts,
               const ControlInput& previous_applied);

  void reset();

  // Planned horizon trajectory from the last solve.
  const std::vector<ControlInput>& planned_inputs() const { return inputs_; }
  const std::vector<PathFrameState>& planned_states() const { return states_; }

  // Nonlinear merit of a candidate trajectory; exposed for regression checks.
  double merit(const std::vector<PathFrameState>& states,
               const std::vector<ControlInput>& inputs, const PathFrameState& x0,
               const std::vector<ObstacleForecast>& forecasts,
               const ControlInput& previous_applied) const;

 private:
  // QP subproblem with the state deltas eliminated through the linearized
  // dynamics (condensing): variables are the input deltas plus the ellipse
  // slacks, and delta_x = gamma * delta_u + phi reconstructs the states.
  struct Subproblem {
    DenseQp qp;
    Eigen::MatrixXd gamma;  // 4N x 2N state-propagation map
    Eigen::VectorXd phi;    // 4N accumulated defects
  };

  void cold_start(const PathFrameState& x0);
  void shift_stages();
  Subproblem build_qp(const PathFrameState& x0, const std::vector<ObstacleForecast>& forecasts,
                      const ControlInput& previous_applied) const;

  MpcConfig cfg_;
  ShipParams limits_;
  std::vector<ControlInput> inputs_;     // N
  std::vector<PathFrameState> states_;   // N (stages 1..N)
  QpSolution warm_;
  bool have_warm_ = false;
  bool have_trajectory_ = false;
};

}  // namespace colav
