#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "colav/qp.hpp"

namespace colav {

namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

struct Scaling {
  Eigen::VectorXd d;  // variable scaling
  Eigen::VectorXd e;  // row scaling
  double cost = 1.0;
};

// Modified Ruiz equilibration of [H C'; C 0] plus cost normalization.
Scaling ruiz(Eigen::MatrixXd& H, Eigen::VectorXd& f, Eigen::MatrixXd& C, int passes) {
  const int n = static_cast<int>(H.rows());
  const int k = static_cast<int>(C.rows());
  Scaling s;
  s.d = Eigen::VectorXd::Ones(n);
  s.e = Eigen::VectorXd::Ones(k);

  auto clamp_norm = [](double v) { return std::clamp(v, 1e-8, 1e8); };
  for (int pass = 0; pass < passes; ++pass) {
    Eigen::VectorXd delta(n), eps(k);
    for (int j = 0; j < n; ++j) {
      double col = H.col(j).cwiseAbs().maxCoeff();
      if (k > 0) col = std::max(col, C.col(j).cwiseAbs().maxCoeff());
      delta(j) = 1.0 / std::sqrt(clamp_norm(col));
    }
    for (int i = 0; i < k; ++i)
      eps(i) = 1.0 / std::sqrt(clamp_norm(C.row(i).cwiseAbs().maxCoeff()));

    H = delta.asDiagonal() * H * delta.asDiagonal();
    f = delta.cwiseProduct(f);
    C = eps.asDiagonal() * C * delta.asDiagonal();
    s.d = s.d.cwiseProduct(delta);
    s.e = s.e.cwiseProduct(eps);

    double mean_col = 0.0;
    for (int j = 0; j < n; ++j) mean_col += H.col(j).cwiseAbs().maxCoeff();
    mean_col /= n;
    const double gamma = 1.0 / clamp_norm(std::max(mean_col, inf_norm(f)));
    H *= gamma;
    f *= gamma;
    s.cost *= gamma;
  }
  return s;
}

// Exact KKT solve on the active set identified by the splitting iterate,
// verified before acceptance. Returns true when the polished point satisfies
// feasibility, stationarity and the dual sign conditions.
bool polish(const DenseQp& qp, const Eigen::MatrixXd& C, const Eigen::VectorXd& l,
            const Eigen::VectorXd& u, QpSolution& sol, Eigen::VectorXd& y_full) {
  const int n = qp.num_vars();
  const int k = static_cast<int>(C.rows());

  std::vector<int> act;
  std::vector<bool> at_upper;
  for (int i = 0; i < k; ++i) {
    if (y_full(i) < 0.0 && std::isfinite(l(i))) {
      act.push_back(i);
      at_upper.push_back(false);
    } else if (y_full(i) > 0.0 && std::isfinite(u(i))) {
      act.push_back(i);
      at_upper.push_back(true);
    }
  }
  const int na = static_cast<int>(act.size());

  const Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) return false;

  Eigen::VectorXd x;
  Eigen::VectorXd nu(na);
  if (na == 0) {
    x = llt.solve(-qp.f);
  } else {
    Eigen::MatrixXd G(na, n);
    Eigen::VectorXd d(na);
    for (int i = 0; i < na; ++i) {
      G.row(i) = C.row(act[i]);
      d(i) = at_upper[i] ? u(act[i]) : l(act[i]);
    }
    const Eigen::MatrixXd W = llt.solve(G.transpose());
    const Eigen::MatrixXd S = G * W;
    const Eigen::VectorXd rhs = -(d + G * llt.solve(qp.f));
    const Eigen::LDLT<Eigen::MatrixXd> sldlt(S);
    if (sldlt.info() != Eigen::Success) return false;
    nu = sldlt.solve(rhs);
    if ((S * nu - rhs).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff()))
      return false;  // dependent active set
    x = -llt.solve(qp.f + G.transpose() * nu);
  }

  const double scale = std::max({1.0, inf_norm(qp.f), x.size() ? inf_norm(x) : 0.0});
  const double tol = 1e-9 * scale;

  for (int i = 0; i < na; ++i) {
    if (!at_upper[i] && nu(i) > tol) return false;
    if (at_upper[i] && nu(i) < -tol) return false;
  }
  const Eigen::VectorXd cx = C * x;
  for (int i = 0; i < k; ++i) {
    if (cx(i) < l(i) - tol || cx(i) > u(i) + tol) return false;
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < na; ++i) y(act[i]) = nu(i);
  const Eigen::VectorXd stat = qp.H * x + qp.f + C.transpose() * y;
  if (inf_norm(stat) > tol) return false;

  sol.z = x;
  sol.status = QpStatus::Optimal;
  sol.primal_residual = 0.0;
  for (int i = 0; i < k; ++i)
    sol.primal_residual =
        std::max({sol.primal_residual, l(i) - cx(i), cx(i) - u(i)});
  sol.primal_residual = std::max(sol.primal_residual, 0.0);
  sol.dual_residual = inf_norm(stat);
  y_full = y;
  return true;
}

}  // namespace

QpSolution solve_admm(const DenseQp& qp, const AdmmSettings& settings, const QpSolution* warm) {
  qp.validate();
  const int n = qp.num_vars();
  const int m = qp.num_ineq();
  const int k = m + n;  // stacked rows: user constraints then identity box

  Eigen::MatrixXd C0(k, n);
  if (m > 0) C0.topRows(m) = qp.A;
  C0.bottomRows(n) = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd l(k), u(k);
  for (int i = 0; i < m; ++i) {
    l(i) = qp.b(i);
    u(i) = std::numeric_limits<double>::infinity();
  }
  l.tail(n) = qp.lower;
  u.tail(n) = qp.upper;

  Eigen::MatrixXd Hs = qp.H;
  Eigen::VectorXd fs = qp.f;
  Eigen::MatrixXd C = C0;
  Scaling sc;
  if (settings.scaling) {
    sc = ruiz(Hs, fs, C, 10);
  } else {
    sc.d = Eigen::VectorXd::Ones(n);
    sc.e = Eigen::VectorXd::Ones(k);
  }
  const Eigen::VectorXd ls = sc.e.cwiseProduct(l);
  const Eigen::VectorXd us = sc.e.cwiseProduct(u);

  Eigen::VectorXd rho_scale = Eigen::VectorXd::Ones(k);
  if (settings.row_rho_scale.size() == m) rho_scale.head(m) = settings.row_rho_scale;

  double rho = settings.rho;
  auto factorize = [&](double r) {
    Eigen::MatrixXd K = Hs;
    K.diagonal().array() += settings.sigma;
    K.noalias() += C.transpose() * (r * rho_scale).asDiagonal() * C;
    return Eigen::LLT<Eigen::MatrixXd>(K);
  };
  Eigen::LLT<Eigen::MatrixXd> kkt = factorize(rho);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(k);
  if (warm && warm->z.size() == n) {
    x = warm->z.cwiseQuotient(sc.d);
    if (warm->dual_ineq.size() == m && warm->dual_lower.size() == n) {
      Eigen::VectorXd yu(k);
      yu.head(m) = -warm->dual_ineq;
      yu.tail(n) = warm->dual_upper - warm->dual_lower;
      y = sc.cost * yu.cwiseQuotient(sc.e);
    }
  }
  Eigen::VectorXd z = (C * x).cwiseMax(ls).cwiseMin(us);

  QpSolution sol;
  sol.status = QpStatus::MaxIter;

  Eigen::VectorXd v(k), rhs(n), zprev(k);
  const Eigen::VectorXd einv = sc.e.cwiseInverse();
  const Eigen::VectorXd dinv = sc.d.cwiseInverse();
  const double alpha = settings.alpha;

  int iter = 0;
  for (iter = 1; iter <= settings.max_iter; ++iter) {
    const Eigen::ArrayXd rr = rho * rho_scale.array();
    rhs = settings.sigma * x - fs;
    rhs.noalias() += C.transpose() * (rr * z.array() - y.array()).matrix();
    const Eigen::VectorXd xtilde = kkt.solve(rhs);
    const Eigen::VectorXd ztilde = C * xtilde;
    x = alpha * xtilde + (1.0 - alpha) * x;
    zprev = z;
    const Eigen::VectorXd zrel = alpha * ztilde + (1.0 - alpha) * zprev;
    z = (zrel.array() + y.array() / rr).matrix().cwiseMax(ls).cwiseMin(us);
    y = (y.array() + rr * (zrel - z).array()).matrix();

    const bool check = iter <= 5 || iter % settings.check_every == 0 || iter == settings.max_iter;
    if (!check) continue;

    v.noalias() = C * x;
    // Residuals in the original (unscaled) problem.
    const Eigen::VectorXd cx = einv.cwiseProduct(v);
    const Eigen::VectorXd zu = einv.cwiseProduct(z);
    const double rp = inf_norm(cx - zu);
    Eigen::VectorXd hx = qp.H * sc.d.cwiseProduct(x);
    Eigen::VectorXd cty = C.transpose() * y;  // scaled C' y
    cty = dinv.cwiseProduct(cty) / sc.cost;   // = C0' y_unscaled
    const double rd = inf_norm(hx + qp.f + cty);

    const double eps_p =
        settings.eps_abs + settings.eps_rel * std::max(inf_norm(cx), inf_norm(zu));
    const double eps_d = settings.eps_abs +
                         settings.eps_rel * std::max({inf_norm(hx), inf_norm(qp.f), inf_norm(cty)});
    sol.primal_residual = rp;
    sol.dual_residual = rd;
    if (rp <= eps_p && rd <= eps_d) {
      sol.status = QpStatus::Optimal;
      break;
    }

    if (settings.adaptive_rho && iter % settings.rho_update_every == 0) {
      const double ratio = std::sqrt((rp / std::max(eps_p, 1e-300)) /
                                     std::max(rd / std::max(eps_d, 1e-300), 1e-300));
      const double factor = std::clamp(ratio, 0.1, 10.0);
      if (factor < 0.5 || factor > 2.0) {
        rho = std::clamp(rho * factor, 1e-6, 1e6);
        kkt = factorize(rho);
      }
    }
  }

  sol.iterations = std::min(iter, settings.max_iter);
  sol.z = sc.d.cwiseProduct(x);
  Eigen::VectorXd y_unscaled = sc.e.cwiseProduct(y) / sc.cost;

  if (settings.polish) {
    QpSolution polished = sol;
    Eigen::VectorXd yp = y_unscaled;
    if (polish(qp, C0, l, u, polished, yp)) {
      polished.iterations = sol.iterations;
      sol = polished;
      y_unscaled = yp;
    }
  }

  sol.objective = qp.objective(sol.z);
  sol.dual_ineq = (-y_unscaled.head(m)).cwiseMax(0.0);
  sol.dual_lower = (-y_unscaled.tail(n)).cwiseMax(0.0);
  sol.dual_upper = y_unscaled.tail(n).cwiseMax(0.0);
  return sol;
}

}  // namespace colav
