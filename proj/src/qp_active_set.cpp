#include <cmath>
#include <stdexcept>
#include <vector>

#include "colav/qp.hpp"

namespace colav {

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::MaxIter: return "MaxIter";
  }
  return "Infeasible";
}

void DenseQp::validate() const {
  const int n = num_vars();
  if (H.cols() != n || f.size() != n || lower.size() != n || upper.size() != n)
    throw std::invalid_argument("DenseQp: inconsistent dimensions");
  if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
    throw std::invalid_argument("DenseQp: inconsistent constraint dimensions");
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("DenseQp: H must be symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(H).info() != Eigen::Success)
    throw std::invalid_argument("DenseQp: H must be positive definite");
  for (int j = 0; j < n; ++j)
    if (!(lower(j) <= upper(j))) throw std::invalid_argument("DenseQp: empty box");
}

namespace {

// All constraints in g'z >= c form: the m user rows, then finite lower
// bounds, then finite upper bounds.
struct ConstraintSet {
  Eigen::MatrixXd G;  // M x n
  Eigen::VectorXd c;  // M
  std::vector<int> kind;   // 0 = user row, 1 = lower, 2 = upper
  std::vector<int> index;  // row or variable index
};

ConstraintSet gather(const DenseQp& qp) {
  const int n = qp.num_vars();
  const int m = qp.num_ineq();
  std::vector<Eigen::RowVectorXd> rows;
  ConstraintSet cs;
  std::vector<double> rhs;
  for (int i = 0; i < m; ++i) {
    rows.emplace_back(qp.A.row(i));
    rhs.push_back(qp.b(i));
    cs.kind.push_back(0);
    cs.index.push_back(i);
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(qp.lower(j))) {
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n);
      e(j) = 1.0;
      rows.emplace_back(e);
      rhs.push_back(qp.lower(j));
      cs.kind.push_back(1);
      cs.index.push_back(j);
    }
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(qp.upper(j))) {
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n);
      e(j) = -1.0;
      rows.emplace_back(e);
      rhs.push_back(-qp.upper(j));
      cs.kind.push_back(2);
      cs.index.push_back(j);
    }
  }
  cs.G.resize(static_cast<int>(rows.size()), n);
  cs.c.resize(static_cast<int>(rows.size()));
  for (int i = 0; i < cs.G.rows(); ++i) {
    cs.G.row(i) = rows[i];
    cs.c(i) = rhs[i];
  }
  return cs;
}

bool next_combination(std::vector<int>& idx, int M) {
  const int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < M - k + i) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

// Equality-constrained solve on one candidate active set by the null-space
// method: z never passes through the (possibly huge) multipliers, which keeps
// it accurate even when H spans many orders of magnitude.
bool equality_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
                    const Eigen::MatrixXd& G, const Eigen::VectorXd& c, Eigen::VectorXd& z,
                    Eigen::VectorXd& lambda) {
  const int n = static_cast<int>(H.rows());
  const int k = static_cast<int>(G.rows());

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G.transpose());
  if (qr.rank() < k) return false;  // dependent rows

  const Eigen::MatrixXd Qfull = qr.householderQ();
  const Eigen::MatrixXd R =
      qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Q1 = Qfull.leftCols(k);

  // Particular solution of G z = c (with the column permutation applied).
  const Eigen::VectorXd c_perm = qr.colsPermutation().transpose() * c;
  const Eigen::VectorXd zp =
      Q1 * R.transpose().triangularView<Eigen::Lower>().solve(c_perm);

  if (k < n) {
    const Eigen::MatrixXd Z = Qfull.rightCols(n - k);
    const Eigen::LLT<Eigen::MatrixXd> reduced(Z.transpose() * H * Z);
    if (reduced.info() != Eigen::Success) return false;
    const Eigen::VectorXd w = reduced.solve(-Z.transpose() * (H * zp + f));
    z = zp + Z * w;
  } else {
    z = zp;
  }

  // Multipliers from the stationarity projection G' lambda = H z + f.
  const Eigen::VectorXd lam_perm =
      R.triangularView<Eigen::Upper>().solve(Q1.transpose() * (H * z + f));
  lambda = qr.colsPermutation() * lam_perm;
  return true;
}

}  // namespace

QpSolution solve_active_set(const DenseQp& qp) {
  qp.validate();
  const int n = qp.num_vars();
  if (n > 8) throw std::invalid_argument("solve_active_set: n must be <= 8");

  const ConstraintSet cs = gather(qp);
  const int M = static_cast<int>(cs.G.rows());

  const Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  const Eigen::VectorXd z_free = llt.solve(-qp.f);  // unconstrained minimizer

  QpSolution sol;
  sol.dual_ineq = Eigen::VectorXd::Zero(qp.num_ineq());
  sol.dual_lower = Eigen::VectorXd::Zero(n);
  sol.dual_upper = Eigen::VectorXd::Zero(n);

  const double f_scale = std::max(1.0, qp.f.cwiseAbs().maxCoeff());

  int tested = 0;
  const int max_size = std::min(n, M);
  Eigen::VectorXd z, lambda;
  for (int k = 0; k <= max_size; ++k) {
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    bool more = k <= M;
    while (more) {
      ++tested;
      if (k == 0) {
        z = z_free;
        lambda.resize(0);
      } else {
        Eigen::MatrixXd G(k, n);
        Eigen::VectorXd c(k);
        for (int i = 0; i < k; ++i) {
          G.row(i) = cs.G.row(idx[i]);
          c(i) = cs.c(idx[i]);
        }
        if (!equality_solve(qp.H, qp.f, G, c, z, lambda)) {
          more = next_combination(idx, M);
          continue;
        }
        const double lam_scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
        if ((lambda.array() < -1e-8 * lam_scale).any()) {
          more = next_combination(idx, M);
          continue;
        }
      }

      bool feasible = true;
      const double z_scale = std::max(1.0, z.cwiseAbs().maxCoeff());
      for (int i = 0; i < M && feasible; ++i) {
        const double slack = cs.G.row(i).dot(z) - cs.c(i);
        const double tol =
            1e-8 * std::max({1.0, std::abs(cs.c(i)), cs.G.row(i).cwiseAbs().maxCoeff() * z_scale});
        feasible = slack >= -tol;
      }
      if (feasible) {
        sol.z = z;
        sol.status = QpStatus::Optimal;
        sol.objective = qp.objective(z);
        Eigen::VectorXd grad = qp.H * z + qp.f;
        for (int i = 0; i < k; ++i) {
          const double lam = std::max(lambda(i), 0.0);
          grad -= cs.G.row(idx[i]).transpose() * lambda(i);
          switch (cs.kind[idx[i]]) {
            case 0: sol.dual_ineq(cs.index[idx[i]]) = lam; break;
            case 1: sol.dual_lower(cs.index[idx[i]]) = lam; break;
            case 2: sol.dual_upper(cs.index[idx[i]]) = lam; break;
          }
        }
        sol.iterations = tested;
        sol.dual_residual = grad.cwiseAbs().maxCoeff() / f_scale;
        sol.primal_residual = 0.0;
        for (int i = 0; i < M; ++i)
          sol.primal_residual =
              std::max(sol.primal_residual, cs.c(i) - cs.G.row(i).dot(z));
        sol.primal_residual = std::max(sol.primal_residual, 0.0);
        return sol;
      }
      more = next_combination(idx, M);
    }
  }

  sol.status = QpStatus::Infeasible;
  sol.iterations = tested;
  sol.z = z_free;
  sol.objective = qp.objective(z_free);
  return sol;
}

}  // namespace colav
