#include "hmpc/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace hmpc {

void LmiBlock::add(int var, int r, int c, double v) {
  if (v == 0.0) return;
  std::size_t k = 0;
  while (k < vars.size() && vars[k] != var) ++k;
  if (k == vars.size()) {
    vars.push_back(var);
    coeffs.emplace_back();
  }
  coeffs[k].push_back({r, c, v});
  if (r != c) coeffs[k].push_back({c, r, v});
}

Eigen::MatrixXd LmiBlock::eval(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd S = F0;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const double yi = y(vars[k]);
    for (const auto& e : coeffs[k]) S(e.r, e.c) += yi * e.v;
  }
  return S;
}

double min_block_eig(const SdpProblem& prob, const Eigen::VectorXd& y) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& b : prob.blocks) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.eval(y), Eigen::EigenvaluesOnly);
    worst = std::min(worst, es.eigenvalues().minCoeff());
  }
  return worst;
}

namespace {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Linear part of a block applied to a direction: sum_i d_i F_i.
MatX apply_lin(const LmiBlock& b, const VecX& d) {
  MatX S = MatX::Zero(b.n, b.n);
  for (std::size_t k = 0; k < b.vars.size(); ++k) {
    const double di = d(b.vars[k]);
    if (di == 0.0) continue;
    for (const auto& e : b.coeffs[k]) S(e.r, e.c) += di * e.v;
  }
  return S;
}

// out_i += scale * tr(F_i M) for every variable in the block.
void adjoint_add(const LmiBlock& b, const MatX& M, double scale, VecX& out) {
  for (std::size_t k = 0; k < b.vars.size(); ++k) {
    double tr = 0.0;
    for (const auto& e : b.coeffs[k]) tr += e.v * M(e.c, e.r);
    out(b.vars[k]) += scale * tr;
  }
}

// Largest step in (0, 1] keeping S + a dS positive definite, scaled by frac.
double max_step(const MatX& S, const MatX& dS, double frac) {
  Eigen::LLT<MatX> llt(S);
  const MatX Li = llt.matrixL().solve(MatX::Identity(S.rows(), S.cols()));
  const MatX T = Li * dS * Li.transpose();
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (T + T.transpose()), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0) return 1.0;
  return std::min(1.0, -frac / lmin);
}

MatX sym(const MatX& M) { return 0.5 * (M + M.transpose()); }

double log_det(const MatX& M) {
  Eigen::LLT<MatX> llt(M);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

// Infeasible primal-dual path following with the HKM direction and a Mehrotra
// correction. The log-det block is carried as a block whose complementarity
// target stays at one; every other block follows the central path parameter.
SdpResult solve_sdp(const SdpProblem& prob, const Eigen::VectorXd& y0, const SdpSettings& s) {
  SdpResult res;
  const int K = static_cast<int>(prob.blocks.size());
  const int m = prob.m;
  int nu = 0;
  for (int k = 0; k < K; ++k)
    if (k != prob.logdet_block) nu += prob.blocks[k].n;

  VecX y = y0;
  std::vector<MatX> S(K), Z(K);
  for (int k = 0; k < K; ++k) {
    const LmiBlock& b = prob.blocks[k];
    MatX Fk = b.eval(y);
    Eigen::SelfAdjointEigenSolver<MatX> es(Fk, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double scale = std::max(1.0, Fk.cwiseAbs().maxCoeff());
    if (lmin < 1e-3 * scale) Fk.diagonal().array() += (1e-3 * scale - lmin);
    S[k] = Fk;
    Z[k] = Fk.llt().solve(MatX::Identity(b.n, b.n));
  }

  const double cnorm = std::max(1.0, prob.c.lpNorm<Eigen::Infinity>());
  int it = 0;
  for (; it < s.max_iter; ++it) {
    VecX rd = prob.c;  // c - sum_k A_k*(Z_k)
    for (int k = 0; k < K; ++k) adjoint_add(prob.blocks[k], Z[k], -1.0, rd);
    std::vector<MatX> Rp(K);  // F_k(y) - S_k
    double pinf = 0.0;
    double mu = 0.0;
    for (int k = 0; k < K; ++k) {
      Rp[k] = prob.blocks[k].eval(y) - S[k];
      pinf = std::max(pinf, Rp[k].cwiseAbs().maxCoeff() / std::max(1.0, S[k].cwiseAbs().maxCoeff()));
      if (k != prob.logdet_block) mu += S[k].cwiseProduct(Z[k]).sum();
    }
    mu /= std::max(1, nu);
    // The log-det block is optimal only where S Z = I.
    double cent = 0.0;
    if (prob.logdet_block >= 0) {
      const MatX& Sl = S[prob.logdet_block];
      cent = (Sl * Z[prob.logdet_block] - MatX::Identity(Sl.rows(), Sl.cols())).cwiseAbs().maxCoeff();
    }
    const double dinf = rd.lpNorm<Eigen::Infinity>() / cnorm;
    double obj = prob.c.dot(y);
    if (prob.logdet_block >= 0) obj -= log_det(S[prob.logdet_block]);
    res.gap_bound = mu * nu;
    if (s.verbose)
      std::fprintf(stderr, "sdp it=%d obj=%.10g mu=%.3e pinf=%.3e dinf=%.3e cent=%.3e\n", it, obj, mu, pinf, dinf,
                   cent);
    if (pinf < 1e-10 && dinf < 1e-8 && cent < 1e-8 && mu * nu <= s.rel_gap * std::max(1.0, std::abs(obj))) {
      res.converged = true;
      break;
    }
    if (!std::isfinite(mu) || mu > 1e14) {
      res.message = "diverged";
      break;
    }

    // Schur complement M(i,j) = sum_k tr(F_i Z F_j S^-1).
    MatX M = MatX::Zero(m, m);
    std::vector<MatX> Sinv(K);
    for (int k = 0; k < K; ++k) {
      const LmiBlock& b = prob.blocks[k];
      Sinv[k] = S[k].llt().solve(MatX::Identity(b.n, b.n));
      const int na = static_cast<int>(b.vars.size());
      const int nn = b.n * b.n;
      MatX Gz(na, nn), Gs(na, nn), T(b.n, b.n);
      for (int a = 0; a < na; ++a) {
        T.setZero();
        for (const auto& e : b.coeffs[a]) T.col(e.c) += e.v * Z[k].col(e.r);
        Gz.row(a) = Eigen::Map<const Eigen::RowVectorXd>(T.data(), nn);
        T.setZero();
        for (const auto& e : b.coeffs[a]) T.col(e.c) += e.v * Sinv[k].col(e.r);
        const MatX Tt = T.transpose();
        Gs.row(a) = Eigen::Map<const Eigen::RowVectorXd>(Tt.data(), nn);
      }
      const MatX Mb = Gz * Gs.transpose();
      for (int a = 0; a < na; ++a)
        for (int c = 0; c < na; ++c) M(b.vars[a], b.vars[c]) += Mb(a, c);
    }
    M = sym(M);
    Eigen::LDLT<MatX> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
      res.message = "schur complement factorization failed";
      break;
    }

    // dS = A(dy) + Rp, dZ = sig S^-1 - Z - Z dS S^-1 - corr S^-1.
    auto direction = [&](const std::vector<double>& sig, const std::vector<MatX>* corr, VecX& dy,
                         std::vector<MatX>& dS, std::vector<MatX>& dZ) {
      VecX rhs = -rd;
      for (int k = 0; k < K; ++k) {
        MatX base = sig[k] * Sinv[k] - Z[k] - Z[k] * Rp[k] * Sinv[k];
        if (corr) base -= (*corr)[k] * Sinv[k];
        adjoint_add(prob.blocks[k], base, 1.0, rhs);
      }
      dy = ldlt.solve(rhs);
      dS.resize(K);
      dZ.resize(K);
      for (int k = 0; k < K; ++k) {
        dS[k] = apply_lin(prob.blocks[k], dy) + Rp[k];
        MatX dz = sig[k] * Sinv[k] - Z[k] - Z[k] * dS[k] * Sinv[k];
        if (corr) dz -= (*corr)[k] * Sinv[k];
        dZ[k] = sym(dz);
      }
    };
    auto steps = [&](const std::vector<MatX>& dS, const std::vector<MatX>& dZ, double frac,
                     double& ap, double& ad) {
      ap = 1.0;
      ad = 1.0;
      for (int k = 0; k < K; ++k) {
        ap = std::min(ap, max_step(S[k], dS[k], frac));
        ad = std::min(ad, max_step(Z[k], dZ[k], frac));
      }
    };

    std::vector<double> sig(K, 0.0);
    if (prob.logdet_block >= 0) sig[prob.logdet_block] = 1.0;
    VecX dy;
    std::vector<MatX> dS, dZ;
    direction(sig, nullptr, dy, dS, dZ);
    double ap, ad;
    steps(dS, dZ, 1.0, ap, ad);
    double mu_aff = 0.0;
    for (int k = 0; k < K; ++k)
      if (k != prob.logdet_block) mu_aff += (S[k] + ap * dS[k]).cwiseProduct(Z[k] + ad * dZ[k]).sum();
    mu_aff /= std::max(1, nu);
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);
    std::vector<MatX> corr(K);
    for (int k = 0; k < K; ++k) corr[k] = dZ[k] * dS[k];
    for (int k = 0; k < K; ++k)
      if (k != prob.logdet_block) sig[k] = sigma * mu;
    direction(sig, &corr, dy, dS, dZ);
    steps(dS, dZ, 0.95, ap, ad);
    y += ap * dy;
    for (int k = 0; k < K; ++k) {
      S[k] = sym(S[k] + ap * dS[k]);
      Z[k] = sym(Z[k] + ad * dZ[k]);
    }
  }
  res.iterations = it;
  res.y = y;
  res.min_eig = min_block_eig(prob, y);
  res.feasible = res.min_eig > -1e-8;
  if (prob.logdet_block >= 0) {
    Eigen::LLT<MatX> llt(prob.blocks[prob.logdet_block].eval(y));
    res.objective = prob.c.dot(y) - 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  } else {
    res.objective = prob.c.dot(y);
  }
  if (!res.converged && res.message.empty())
    res.message = res.feasible ? "iteration limit" : "no feasible point found (likely infeasible)";
  return res;
}

}  // namespace hmpc
