#pragma once

#include <Eigen/Dense>

namespace colav {

enum class QpStatus { Optimal, Infeasible, MaxIter };

const char* to_string(QpStatus s);

// Strictly convex dense QP
//   min  1/2 z'Hz + f'z
//   s.t. A z >= b,  lower <= z <= upper.
// H must be symmetric positive definite; box entries may be +-infinity.
struct DenseQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A;  // m x n, may have zero rows
  Eigen::VectorXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_ineq() const { return static_cast<int>(A.rows()); }
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + f.dot(z); }
  void validate() const;  // throws std::invalid_argument
};

struct QpSolution {
  Eigen::VectorXd z;
  QpStatus status = QpStatus::Infeasible;
  double objective = 0.0;
  Eigen::VectorXd dual_ineq;   // >= 0 on Optimal
  Eigen::VectorXd dual_lower;  // >= 0
  Eigen::VectorXd dual_upper;  // >= 0
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

// Exact solver for small problems (n <= 8) by enumeration of candidate active
// sets with a shared Cholesky factor of H. The first KKT-consistent subset in
// index order wins, so ties break deterministically toward lower constraint
// indices. Never reports a suboptimal point as Optimal.
QpSolution solve_active_set(const DenseQp& qp);

struct AdmmSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 4000;
  int check_every = 5;
  int rho_update_every = 50;
  bool adaptive_rho = true;
  bool scaling = true;  // Ruiz equilibration
  // Exact KKT re-solve on the active set identified by the iterate; accepted
  // only when the polished point passes feasibility and sign checks.
  bool polish = true;
  // Optional per-row penalty multipliers for the m inequality rows; rows that
  // encode equalities as >=/<= pairs benefit from a large value (~1e3).
  Eigen::VectorXd row_rho_scale;
};

// Operator-splitting solver for general sizes. Stops when unscaled primal and
// dual residuals meet eps_abs/eps_rel; returns MaxIter with residuals
// otherwise. warm, when given, seeds the primal/dual iterates.
QpSolution solve_admm(const DenseQp& qp, const AdmmSettings& settings = {},
                      const QpSolution* warm = nullptr);

}  // namespace colav
