#include "hmpc/qp.hpp"

#include <algorithm>
#include <cmath>

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::solved: return "solved";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::nan: return "nan";
  }
  return "?";
}

namespace {

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

double max_step(const VectorXd& v, const VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, const QpSettings& s) {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.A.rows();
  const Eigen::Index p = qp.E.rows();
  QpResult res;
  res.z = VectorXd::Zero(n);
  res.lam = VectorXd::Zero(m);
  res.nu = VectorXd::Zero(p);

  // Rows with no variables: decide them directly.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (qp.A.row(i).cwiseAbs().maxCoeff() == 0.0 && qp.b(i) < -s.tol) {
      res.status = QpStatus::infeasible;
      return res;
    }
  }

  const double scale_d = 1.0 + inf_norm(qp.f);
  const double scale_p = 1.0 + std::max(inf_norm(qp.b), inf_norm(qp.e));

  auto solve_kkt = [&](const MatrixXd& K, const VectorXd& r1, const VectorXd& r2, VectorXd& dz,
                       VectorXd& dnu) {
    if (p == 0) {
      Eigen::LDLT<MatrixXd> ldlt(K);
      dz = ldlt.solve(r1);
      dnu.resize(0);
      return;
    }
    MatrixXd KK = MatrixXd::Zero(n + p, n + p);
    KK.topLeftCorner(n, n) = K;
    KK.topRightCorner(n, p) = qp.E.transpose();
    KK.bottomLeftCorner(p, n) = qp.E;
    KK.bottomRightCorner(p, p).diagonal().setConstant(-1e-13);
    VectorXd rhs(n + p);
    rhs << r1, r2;
    const VectorXd sol = KK.partialPivLu().solve(rhs);
    dz = sol.head(n);
    dnu = sol.tail(p);
  };

  VectorXd z = VectorXd::Zero(n), nu = VectorXd::Zero(p);
  if (m == 0) {
    VectorXd dz, dnu;
    solve_kkt(qp.H, -qp.f, qp.e, dz, dnu);
    res.z = dz;
    res.nu = dnu;
    res.iterations = 1;
    res.status = dz.allFinite() ? QpStatus::solved : QpStatus::nan;
    return res;
  }

  VectorXd w = (qp.b - qp.A * z).cwiseMax(1.0);
  VectorXd lam = VectorXd::Ones(m);

  for (int it = 0; it < s.max_iter; ++it) {
    const VectorXd rd = qp.H * z + qp.f + qp.A.transpose() * lam + (p ? VectorXd(qp.E.transpose() * nu) : VectorXd::Zero(n));
    const VectorXd rp = qp.A * z + w - qp.b;
    const VectorXd re = p ? VectorXd(qp.E * z - qp.e) : VectorXd();
    const double mu = w.dot(lam) / static_cast<double>(m);
    res.iterations = it;
    res.dual_res = inf_norm(rd) / scale_d;
    res.primal_res = std::max(inf_norm(rp), inf_norm(re)) / scale_p;
    res.mu = mu;
    if (!std::isfinite(mu) || !rd.allFinite()) {
      res.status = QpStatus::nan;
      break;
    }
    if (res.dual_res < s.tol && res.primal_res < s.tol && mu < s.tol) {
      res.status = QpStatus::solved;
      break;
    }
    // Diverging multipliers with stalled primal residual: no feasible point.
    if (inf_norm(lam) > 1e12 && res.primal_res > 1e-6) {
      res.status = QpStatus::infeasible;
      break;
    }

    const VectorXd D = lam.cwiseQuotient(w);
    const MatrixXd K = qp.H + qp.A.transpose() * D.asDiagonal() * qp.A;
    auto direction = [&](const VectorXd& rc, VectorXd& dz, VectorXd& dw, VectorXd& dl, VectorXd& dn) {
      const VectorXd t = D.cwiseProduct(rp) + rc.cwiseQuotient(w);
      solve_kkt(K, -rd - qp.A.transpose() * t, p ? VectorXd(-re) : VectorXd(), dz, dn);
      dl = D.cwiseProduct(qp.A * dz) + t;
      dw = -rp - qp.A * dz;
    };

    VectorXd dz, dw, dl, dn;
    VectorXd rc = -w.cwiseProduct(lam);
    direction(rc, dz, dw, dl, dn);
    const double a_aff = std::min(max_step(w, dw), max_step(lam, dl));
    const double mu_aff = (w + a_aff * dw).dot(lam + a_aff * dl) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);
    rc = -w.cwiseProduct(lam) + VectorXd::Constant(m, sigma * mu) - dw.cwiseProduct(dl);
    direction(rc, dz, dw, dl, dn);
    const double a = std::min(1.0, 0.99 * std::min(max_step(w, dw), max_step(lam, dl)));
    z += a * dz;
    w += a * dw;
    lam += a * dl;
    if (p) nu += a * dn;
    res.iterations = it + 1;
  }
  if (res.status == QpStatus::max_iter && res.primal_res > 1e-6) res.status = QpStatus::infeasible;
  res.z = z;
  res.lam = lam;
  res.nu = nu;
  return res;
}

}  // namespace hmpc
