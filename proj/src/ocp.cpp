#include "hmpc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace hmpc {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::solved: return "solved";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible_qp: return "infeasible_qp";
    case SolveStatus::nan: return "nan";
  }
  return "?";
}

bool OcpSpec::has_soft() const {
  for (const auto& p : path)
    if (p.rows.soft) return true;
  for (const auto& r : terminal_rows)
    if (r.soft) return true;
  return false;
}

void OcpSpec::validate() const {
  if (!model) throw std::invalid_argument("ocp: model missing");
  if (N < 1 || substeps < 1 || !(dt > 0.0)) throw std::invalid_argument("ocp: bad horizon");
  if (x0.size() != model->nx()) throw std::invalid_argument("ocp: x0 dimension");
  if (u_default.size() != model->nu()) throw std::invalid_argument("ocp: u_default dimension");
  if (!stage_cost) throw std::invalid_argument("ocp: stage cost missing");
  for (const auto& p : path) {
    if (p.stage < 0 || p.stage >= N || p.sub < 0 || p.sub >= substeps)
      throw std::invalid_argument("ocp: path row node out of range");
    if (p.rows.Cx.rows() != p.rows.rows() || p.rows.Cx.cols() != model->nx())
      throw std::invalid_argument("ocp: path row dimension");
    if (p.rows.Cu.size() && (p.rows.Cu.rows() != p.rows.rows() || p.rows.Cu.cols() != model->nu()))
      throw std::invalid_argument("ocp: path row input dimension");
  }
  for (const auto& r : terminal_rows)
    if (r.Cx.cols() != model->nx() || r.Cx.rows() != r.rows())
      throw std::invalid_argument("ocp: terminal row dimension");
  if (term_eq_A.size() && (term_eq_A.cols() != model->nx() || term_eq_A.rows() != term_eq_b.size()))
    throw std::invalid_argument("ocp: terminal equality dimension");
}

void add_weighted_ls(StageCost& c, const Vec& r, const Mat& Jx, const Mat& Ju, const Vec& w) {
  const Vec wr = w.cwiseProduct(r);
  c.value += r.dot(wr);
  c.gx += 2.0 * Jx.transpose() * wr;
  c.gu += 2.0 * Ju.transpose() * wr;
  c.Hxx += 2.0 * Jx.transpose() * w.asDiagonal() * Jx;
  c.Hxu += 2.0 * Jx.transpose() * w.asDiagonal() * Ju;
  c.Huu += 2.0 * Ju.transpose() * w.asDiagonal() * Ju;
}

namespace {

// The initial node is fixed, so rows there that do not involve the input are
// constants and are left out.
bool at_initial_node(const PathRows& p) { return p.stage == 0 && p.sub == 0; }

bool row_skipped(const LinRows& r, int i, bool initial) {
  return initial && (r.Cu.size() == 0 || r.Cu.row(i).isZero(0.0));
}

StageCost zero_cost(int nx, int nu) {
  StageCost c;
  c.gx = Vec::Zero(nx);
  c.gu = Vec::Zero(nu);
  c.Hxx = Mat::Zero(nx, nx);
  c.Hxu = Mat::Zero(nx, nu);
  c.Huu = Mat::Zero(nu, nu);
  return c;
}

struct Evaluation {
  double J = 0.0;
  double infeas_l1 = 0.0;
  double defect = 0.0;
  double violation = 0.0;
  bool finite = true;
};

// Integrates every stage, fills sol.sub, and measures cost and infeasibility.
Evaluation evaluate(const OcpSpec& spec, OcpSolution& sol) {
  const int nx = spec.model->nx(), nu = spec.model->nu();
  const double h = spec.dt / spec.substeps;
  Evaluation ev;
  sol.sub.assign(spec.N, {});
  for (int k = 0; k < spec.N; ++k) {
    Vec xs = sol.x[k];
    sol.sub[k].reserve(spec.substeps);
    for (int j = 0; j < spec.substeps; ++j) {
      sol.sub[k].push_back(xs);
      Vec nxt;
      spec.model->step(xs, sol.u[k], h, nxt, nullptr, nullptr);
      xs = std::move(nxt);
    }
    const Vec d = xs - sol.x[k + 1];
    ev.defect = std::max(ev.defect, d.lpNorm<Eigen::Infinity>());
    ev.infeas_l1 += d.lpNorm<1>();
    StageCost c = zero_cost(nx, nu);
    spec.stage_cost(k, sol.x[k], sol.u[k], c);
    ev.J += c.value;
  }
  if (spec.terminal_cost) {
    TerminalCost tc;
    tc.gx = Vec::Zero(nx);
    tc.Hxx = Mat::Zero(nx, nx);
    spec.terminal_cost(sol.x[spec.N], tc);
    ev.J += tc.value;
  }
  const bool soft = sol.slack.size() > 0;
  if (soft) {
    for (Eigen::Index i = 0; i < sol.slack.size(); ++i) {
      const double s = sol.slack(i);
      ev.J += spec.slack_quad * s * s + spec.slack_lin * s;
      if (s < 0.0) {
        ev.violation = std::max(ev.violation, -s);
        ev.infeas_l1 += -s;
      }
    }
  }
  auto account = [&](double v) {
    if (v > 0.0) {
      ev.violation = std::max(ev.violation, v);
      ev.infeas_l1 += v;
    }
  };
  for (const auto& p : spec.path) {
    Vec g = p.rows.Cx * sol.sub[p.stage][p.sub] - p.rows.d;
    if (p.rows.Cu.size()) g += p.rows.Cu * sol.u[p.stage];
    if (p.rows.soft && soft) g.array() -= sol.slack(p.stage);
    const bool initial = at_initial_node(p);
    for (int i = 0; i < p.rows.rows(); ++i)
      if (!row_skipped(p.rows, i, initial)) account(g(i));
  }
  const Vec& xN = sol.x[spec.N];
  for (const auto& r : spec.terminal_rows) {
    Vec g = r.Cx * xN - r.d;
    if (r.soft && soft) g.array() -= sol.slack(spec.N);
    for (Eigen::Index i = 0; i < g.size(); ++i) account(g(i));
  }
  if (spec.term_eq_A.size()) {
    const Vec e = spec.term_eq_A * xN - spec.term_eq_b;
    ev.violation = std::max(ev.violation, e.lpNorm<Eigen::Infinity>());
    ev.infeas_l1 += e.lpNorm<1>();
  }
  if (spec.terminal_quad) {
    const Vec dx = xN - spec.terminal_quad->center;
    account(dx.dot(spec.terminal_quad->P * dx) - spec.terminal_quad->level);
  }
  ev.finite = std::isfinite(ev.J) && std::isfinite(ev.infeas_l1);
  return ev;
}

struct LocalQp {
  QpProblem qp;
  std::vector<Mat> Sx;  // dx_k = Sx_k z + cx_k
  std::vector<Vec> cx;
  std::vector<Vec> gx, gu;  // stage gradients, gx[N] terminal
  std::vector<Mat> Hs;      // stage Hessians over [x; u], Hs[N] terminal over x
  int nzu = 0, ns = 0;
};

LocalQp build_qp(const OcpSpec& spec, const OcpSolution& it, const OcpSettings& cfg) {
  const int nx = spec.model->nx(), nu = spec.model->nu(), N = spec.N;
  const double h = spec.dt / spec.substeps;
  LocalQp L;
  L.nzu = N * nu;
  L.ns = it.slack.size();
  const int nz = L.nzu + L.ns;
  L.Sx.assign(N + 1, Mat::Zero(nx, nz));
  L.cx.assign(N + 1, Vec::Zero(nx));
  L.gx.resize(N + 1);
  L.gu.resize(N);
  L.Hs.resize(N + 1);
  Mat H = Mat::Zero(nz, nz);
  Vec f = Vec::Zero(nz);

  std::vector<std::vector<const PathRows*>> bucket(static_cast<std::size_t>(N) * spec.substeps);
  for (const auto& p : spec.path)
    bucket[static_cast<std::size_t>(p.stage) * spec.substeps + p.sub].push_back(&p);

  std::vector<Eigen::RowVectorXd> arows;
  std::vector<double> brows;
  auto add_rows = [&](const LinRows& r, const Mat& S, const Vec& c, const Vec& xbar, int k_u, int s_idx,
                      bool initial) {
    for (int i = 0; i < r.rows(); ++i) {
      if (row_skipped(r, i, initial)) continue;
      Eigen::RowVectorXd a = r.Cx.row(i) * S;
      double b = r.d(i) - r.Cx.row(i).dot(xbar + c);
      if (k_u >= 0 && r.Cu.size()) {
        a.segment(k_u * nu, nu) += r.Cu.row(i);
        b -= r.Cu.row(i).dot(it.u[k_u]);
      }
      if (r.soft && s_idx >= 0) {
        a(L.nzu + s_idx) -= 1.0;
        b += it.slack(s_idx);
      }
      arows.push_back(std::move(a));
      brows.push_back(b);
    }
  };

  for (int k = 0; k < N; ++k) {
    Mat S = L.Sx[k];
    Vec c = L.cx[k];
    Vec xs = it.x[k];
    for (int j = 0; j < spec.substeps; ++j) {
      for (const PathRows* p : bucket[static_cast<std::size_t>(k) * spec.substeps + j])
        add_rows(p->rows, S, c, xs, k, L.ns ? k : -1, k == 0 && j == 0);
      Vec nxt;
      Mat A, B;
      spec.model->step(xs, it.u[k], h, nxt, &A, &B);
      S = A * S;
      S.middleCols(k * nu, nu) += B;
      c = A * c;
      xs = std::move(nxt);
    }
    L.Sx[k + 1] = S;
    L.cx[k + 1] = c + (xs - it.x[k + 1]);

    StageCost sc = zero_cost(nx, nu);
    spec.stage_cost(k, it.x[k], it.u[k], sc);
    Mat G = Mat::Zero(nx + nu, nz);
    G.topRows(nx) = L.Sx[k];
    G.block(nx, k * nu, nu, nu).setIdentity();
    Mat Hs(nx + nu, nx + nu);
    Hs << sc.Hxx, sc.Hxu, sc.Hxu.transpose(), sc.Huu;
    Vec gs(nx + nu);
    gs << sc.gx, sc.gu;
    Vec cs = Vec::Zero(nx + nu);
    cs.head(nx) = L.cx[k];
    H += G.transpose() * Hs * G;
    f += G.transpose() * (gs + Hs * cs);
    L.gx[k] = sc.gx;
    L.gu[k] = sc.gu;
    L.Hs[k] = Hs;
  }

  const Mat& SN = L.Sx[N];
  const Vec& cN = L.cx[N];
  const Vec& xN = it.x[N];
  L.gx[N] = Vec::Zero(nx);
  L.Hs[N] = Mat::Zero(nx, nx);
  if (spec.terminal_cost) {
    TerminalCost tc;
    tc.gx = Vec::Zero(nx);
    tc.Hxx = Mat::Zero(nx, nx);
    spec.terminal_cost(xN, tc);
    H += SN.transpose() * tc.Hxx * SN;
    f += SN.transpose() * (tc.gx + tc.Hxx * cN);
    L.gx[N] = tc.gx;
    L.Hs[N] = tc.Hxx;
  }
  for (int i = 0; i < L.ns; ++i) {
    H(L.nzu + i, L.nzu + i) += 2.0 * spec.slack_quad;
    f(L.nzu + i) += spec.slack_lin + 2.0 * spec.slack_quad * it.slack(i);
    Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(nz);
    a(L.nzu + i) = -1.0;
    arows.push_back(a);
    brows.push_back(it.slack(i));
  }
  for (const auto& r : spec.terminal_rows) add_rows(r, SN, cN, xN, -1, L.ns ? N : -1, false);
  if (spec.terminal_quad) {
    const auto& tq = *spec.terminal_quad;
    const Vec d = xN - tq.center;
    const Vec grad = 2.0 * tq.P * d;
    arows.push_back(grad.transpose() * SN);
    brows.push_back(tq.level - cfg.terminal_margin - d.dot(tq.P * d) - grad.dot(cN));
  }

  L.qp.H = 0.5 * (H + H.transpose());
  L.qp.f = f;
  L.qp.A.resize(static_cast<Eigen::Index>(arows.size()), nz);
  L.qp.b.resize(static_cast<Eigen::Index>(brows.size()));
  for (std::size_t i = 0; i < arows.size(); ++i) {
    L.qp.A.row(static_cast<Eigen::Index>(i)) = arows[i];
    L.qp.b(static_cast<Eigen::Index>(i)) = brows[i];
  }
  if (spec.term_eq_A.size()) {
    L.qp.E = spec.term_eq_A * SN;
    L.qp.e = spec.term_eq_b - spec.term_eq_A * (xN + cN);
  } else {
    L.qp.E.resize(0, nz);
    L.qp.e.resize(0);
  }
  return L;
}

void initialize(const OcpSpec& spec, const OcpSolution* warm, OcpSolution& it) {
  const int nx = spec.model->nx(), nu = spec.model->nu();
  const bool ok = warm && static_cast<int>(warm->x.size()) == spec.N + 1 &&
                  static_cast<int>(warm->u.size()) == spec.N && warm->x[0].size() == nx &&
                  warm->u[0].size() == nu;
  if (ok) {
    it.x = warm->x;
    it.u = warm->u;
  } else {
    it.x.assign(spec.N + 1, spec.x0);
    it.u.assign(spec.N, spec.u_default);
  }
  it.x[0] = spec.x0;
  if (spec.has_soft()) {
    if (ok && warm->slack.size() == spec.N + 1) it.slack = warm->slack.cwiseMax(0.0);
    else it.slack = Vec::Zero(spec.N + 1);
  } else {
    it.slack.resize(0);
  }
}

OcpSolution apply_step(const OcpSolution& it, const LocalQp& L, const Vec& z, double alpha, int nu) {
  OcpSolution t;
  const int N = static_cast<int>(it.u.size());
  t.x.resize(N + 1);
  t.u.resize(N);
  for (int k = 0; k <= N; ++k) t.x[k] = it.x[k] + alpha * (L.Sx[k] * z + L.cx[k]);
  t.x[0] = it.x[0];
  for (int k = 0; k < N; ++k) t.u[k] = it.u[k] + alpha * z.segment(k * nu, nu);
  if (L.ns) t.slack = it.slack + alpha * z.tail(L.ns);
  return t;
}

}  // namespace

void evaluate_candidate(const OcpSpec& spec, OcpSolution& sol) {
  spec.validate();
  const Evaluation ev = evaluate(spec, sol);
  sol.objective = ev.J;
  sol.defect = ev.defect;
  sol.violation = ev.violation;
}

double kkt_residual(const OcpSpec& spec, const OcpSolution& candidate, const OcpSettings& cfg) {
  spec.validate();
  OcpSolution c = candidate;
  if (spec.has_soft() && c.slack.size() != spec.N + 1) c.slack = Vec::Zero(spec.N + 1);
  if (!spec.has_soft()) c.slack.resize(0);
  const Evaluation ev = evaluate(spec, c);
  const LocalQp L = build_qp(spec, c, cfg);
  QpSettings qs;
  qs.tol = cfg.qp_tol;
  const QpResult r = solve_qp(L.qp, qs);
  if (r.status != QpStatus::solved) return std::numeric_limits<double>::infinity();
  return (L.qp.H * r.z).lpNorm<Eigen::Infinity>() + std::max(ev.defect, ev.violation);
}

OcpSolution solve_ocp(const OcpSpec& spec, const OcpSolution* warm, const OcpSettings& cfg) {
  spec.validate();
  const int nu = spec.model->nu();
  OcpSolution it;
  initialize(spec, warm, it);
  Evaluation ev = evaluate(spec, it);
  double rho = 1.0;
  QpSettings qs;
  qs.tol = cfg.qp_tol;
  it.status = SolveStatus::max_iter;
  int iter = 0;
  for (; iter < cfg.max_iter; ++iter) {
    if (!ev.finite) {
      it.status = SolveStatus::nan;
      break;
    }
    const LocalQp L = build_qp(spec, it, cfg);
    const QpResult r = solve_qp(L.qp, qs);
    if (r.status == QpStatus::nan) {
      it.status = SolveStatus::nan;
      break;
    }
    if (r.status != QpStatus::solved) {
      it.status = SolveStatus::infeasible_qp;
      break;
    }
    const Vec& z = r.z;
    const double stat = (L.qp.H * z).lpNorm<Eigen::Infinity>();
    it.kkt = stat + std::max(ev.defect, ev.violation);
    it.step_norm = z.lpNorm<Eigen::Infinity>();
    // Directional derivative of the objective and curvature along the full step.
    double dJ = 0.0, curv = 0.0;
    const int nx = spec.model->nx();
    for (int k = 0; k < spec.N; ++k) {
      Vec d(nx + nu);
      d << L.Sx[k] * z + L.cx[k], z.segment(k * nu, nu);
      dJ += L.gx[k].dot(d.head(nx)) + L.gu[k].dot(d.tail(nu));
      curv += d.dot(L.Hs[k] * d);
    }
    const Vec dN = L.Sx[spec.N] * z + L.cx[spec.N];
    dJ += L.gx[spec.N].dot(dN);
    curv += dN.dot(L.Hs[spec.N] * dN);
    for (int i = 0; i < L.ns; ++i) {
      const double ds = z(L.nzu + i);
      dJ += (spec.slack_lin + 2.0 * spec.slack_quad * it.slack(i)) * ds;
      curv += 2.0 * spec.slack_quad * ds * ds;
    }
    const bool feasible = ev.defect <= cfg.eq_tol && ev.violation <= cfg.ineq_tol;
    if (cfg.verbose)
      std::fprintf(stderr, "sqp %2d J=%.10g defect=%.2e viol=%.2e stat=%.2e step=%.2e qp_it=%d\n", iter, ev.J,
                   ev.defect, ev.violation, stat, it.step_norm, r.iterations);
    // Stationary, or the local model promises no meaningful decrease.
    const double model_decrease = -(dJ + 0.5 * curv);
    if (feasible && (stat <= cfg.kkt_tol || it.step_norm <= 1e-10 ||
                     model_decrease <= cfg.decrease_tol * std::max(1.0, std::abs(ev.J)))) {
      it.status = SolveStatus::solved;
      ++iter;
      break;
    }

    if (ev.infeas_l1 > 1e-14) rho = std::max(rho, (dJ + 0.5 * curv) / (0.9 * ev.infeas_l1));
    const double phi0 = ev.J + rho * ev.infeas_l1;
    const double slope = dJ - rho * ev.infeas_l1;

    bool accepted = false;
    double alpha = 1.0;
    for (int hlv = 0; hlv <= cfg.max_halvings; ++hlv, alpha *= 0.5) {
      OcpSolution trial = apply_step(it, L, z, alpha, nu);
      const Evaluation tev = evaluate(spec, trial);
      if (!tev.finite) continue;
      const double phi = tev.J + rho * tev.infeas_l1;
      const double armijo = slope < 0.0 ? 1e-4 * alpha * slope : 0.0;
      if (phi <= phi0 + armijo + 1e-12 * std::max(1.0, std::abs(phi0))) {
        trial.kkt = it.kkt;
        trial.step_norm = it.step_norm;
        it = std::move(trial);
        ev = tev;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      ++iter;
      break;
    }
  }
  it.iterations = iter;
  it.objective = ev.J;
  it.defect = ev.defect;
  it.violation = ev.violation;
  if (it.status == SolveStatus::solved && !(ev.defect <= cfg.eq_tol && ev.violation <= cfg.ineq_tol))
    it.status = SolveStatus::max_iter;
  return it;
}

OcpSolution shift_warm_start(const OcpSolution& prev, int shift, const TailInput& tail,
                             const DiscreteModel& model, double dt, int substeps) {
  const int N = static_cast<int>(prev.u.size());
  if (shift < 0 || shift > N) throw std::invalid_argument("shift_warm_start: bad shift");
  OcpSolution w;
  w.x.resize(N + 1);
  w.u.resize(N);
  for (int k = 0; k + shift <= N; ++k) w.x[k] = prev.x[k + shift];
  for (int k = 0; k + shift < N; ++k) w.u[k] = prev.u[k + shift];
  const double h = dt / substeps;
  for (int k = N - shift; k < N; ++k) {
    w.u[k] = tail(k, w.x[k]);
    Vec xs = w.x[k];
    for (int j = 0; j < substeps; ++j) {
      Vec nxt;
      model.step(xs, w.u[k], h, nxt, nullptr, nullptr);
      xs = std::move(nxt);
    }
    w.x[k + 1] = xs;
  }
  if (prev.slack.size() == N + 1) {
    w.slack = Vec::Zero(N + 1);
    for (int k = 0; k + shift <= N; ++k) w.slack(k) = prev.slack(k + shift);
  }
  return w;
}

}  // namespace hmpc
