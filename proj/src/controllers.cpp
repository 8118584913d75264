#include "hmpc/controllers.hpp"

#include <algorithm>
#include <cmath>

namespace hmpc {

using Eigen::Vector2d;

int Schedule::n_track() const { return static_cast<int>(std::lround(T_track / Ts_track)); }

int Schedule::n_fix() const { return static_cast<int>(std::ceil(T_track / Ts_plan() - 1e-9)); }

int Schedule::n_plan() const { return static_cast<int>(std::lround(T_plan / Ts_plan())); }

void Schedule::validate() const {
  if (!(Ts_track > 0.0)) throw ConfigError("tracker sampling time must be positive");
  if (beta < 2) throw ConfigError("beta must be an integer >= 2");
  if (n_track() < 1 || std::abs(n_track() * Ts_track - T_track) > 1e-9)
    throw ConfigError("tracker horizon must be a whole number of tracker samples");
  const int need = 1 + n_fix() + 2;
  if (n_plan() < need)
    throw ConfigError("planner horizon too short: need at least " + std::to_string(need) +
                      " planner periods for beta=" + std::to_string(beta));
}

int SmpcConfig::n_stages() const { return static_cast<int>(std::lround(T / Ts)); }

double huber(double d, double delta) {
  return d <= delta ? 0.5 * d * d : delta * (d - 0.5 * delta);
}

void go_cost(const Vec& x, const Vec* u, const Goal& goal, const GoCostConfig& c, bool terminal,
             const ModelParams& mp, StageCost& out) {
  const GoWeights& w = terminal ? c.terminal : c.stage;
  // Horizontal distance: Huber value, its gradient, and the reweighted Hessian.
  const Vector2d dxy = x.head<2>() - goal.p.head<2>();
  const double d = dxy.norm();
  const double s = d > c.huber_delta ? c.huber_delta / d : 1.0;
  out.value += w.xy * huber(d, c.huber_delta);
  out.gx.head<2>() += w.xy * s * dxy;
  out.Hxx.topLeftCorner<2, 2>().diagonal().array() += w.xy * s;

  auto ls_x = [&](int i, double r, double wt, double jac) {
    out.value += wt * r * r;
    out.gx(i) += 2.0 * wt * r * jac;
    out.Hxx(i, i) += 2.0 * wt * jac * jac;
  };
  ls_x(ix::pz, x(ix::pz) - goal.p.z(), w.z, 1.0);
  ls_x(ix::psi, x(ix::psi) - goal.yaw, w.yaw, 1.0);
  if (c.thrust_reg == ThrustReg::hover_centered) {
    ls_x(ix::a, x(ix::a) - mp.g, c.w_a, 1.0);
  } else {
    const double a = x(ix::a);
    ls_x(ix::a, a * a - mp.g, c.w_a, 2.0 * a);
  }
  ls_x(ix::mem_phi, x(ix::mem_phi), c.w_cmd_rp, 1.0);
  ls_x(ix::mem_theta, x(ix::mem_theta), c.w_cmd_rp, 1.0);
  ls_x(ix::mem_psi, x(ix::mem_psi), c.w_cmd_yaw, 1.0);

  if (u && !terminal) {
    Vec du = *u;
    if (c.thrust_reg == ThrustReg::hover_centered) du -= steady_ext_input(mp);
    for (int i = 0; i < 4; ++i) {
      out.value += c.U(i) * du(i) * du(i);
      out.gu(i) += 2.0 * c.U(i) * du(i);
      out.Huu(i, i) += 2.0 * c.U(i);
    }
  }
}

Vec hover_ext_state(const Eigen::Vector3d& p, double yaw, const ModelParams& mp) {
  Vec x(kNxExt);
  x.head(kNx) = QuadState::hover(p, yaw, mp).flat();
  x.tail<3>() << 0.0, 0.0, yaw / mp.k_psi;
  return x;
}

Vec steady_ext_input(const ModelParams& mp) {
  Vec u = Vec::Zero(kNuExt);
  u(3) = mp.g / mp.k_a;
  return u;
}

Vec Plan::state_at_tick(long n) const {
  if (n < 0) throw std::out_of_range("plan sample before validity");
  const long m = n / beta;
  if (m >= N()) return x[N()];
  return sub[m][n % beta];
}

Vec Plan::input_at_tick(long n) const {
  if (n < 0) throw std::out_of_range("plan sample before validity");
  const long m = n / beta;
  if (m >= N()) return u_steady;
  return u[m];
}

ReferenceTrajectory subsample_reference(const Plan& plan, double start, int n, double Ts) {
  ReferenceTrajectory r;
  r.start = start;
  r.Ts = Ts;
  const long n0 = std::lround((start - plan.valid_from) / Ts);
  if (n0 < 0) throw std::out_of_range("reference requested before plan validity");
  for (int i = 0; i <= n; ++i) {
    const Vec xe = plan.state_at_tick(n0 + i);
    r.x.push_back(xe.head(kNx));
    r.u.push_back(base_input_of(xe, plan.input_at_tick(n0 + i)));
  }
  return r;
}

int region_index(double tau, double Ts_plan, int N) {
  if (tau < -1e-9 || tau > N * Ts_plan + 1e-9) throw std::out_of_range("time beyond region coverage");
  const int m = static_cast<int>(std::ceil(tau / Ts_plan - 1e-9)) - 1;
  return std::clamp(m, 0, N - 1);
}

const ConvexRegion& region_for_stage(double t_abs, const Plan& plan) {
  return plan.regions.at(region_index(t_abs - plan.valid_from, plan.Ts_plan, plan.N()));
}

std::vector<ZRow> tightened_rows(const PolytopeZ& Z, const TerminalIngredients& ti) {
  if (ti.c_s.size() != Z.n_s()) throw ConfigError("tightening constants do not match the constraint rows");
  std::vector<ZRow> out = Z.rows;
  for (int j = 0; j < Z.n_s(); ++j) out[j].l -= ti.c_s(j) * ti.alpha;
  for (int j = 0; j + 1 < Z.n_s(); j += 2) {
    if (out[j].l + out[j + 1].l <= 0.0)
      throw ConfigError("tightened constraint set is empty for " + out[j].name + "/" + out[j + 1].name);
  }
  return out;
}

namespace {

bool has_input(const ZRow& r) { return r.L.tail(kNu).cwiseAbs().maxCoeff() > 0.0; }

}  // namespace

LinRows ext_rows(const std::vector<ZRow>& rows, bool state_only) {
  std::vector<const ZRow*> keep;
  for (const auto& r : rows)
    if (!state_only || r.L(kNx + 3) == 0.0) keep.push_back(&r);
  LinRows out;
  const int m = static_cast<int>(keep.size());
  out.Cx = Mat::Zero(m, kNxExt);
  out.d.resize(m);
  if (!state_only) out.Cu = Mat::Zero(m, kNuExt);
  for (int i = 0; i < m; ++i) {
    out.Cx.row(i).head(kNx) = keep[i]->L.head(kNx).transpose();
    out.Cx.row(i).tail(3) = keep[i]->L.segment(kNx, 3).transpose();
    if (!state_only) out.Cu(i, 3) = keep[i]->L(kNx + 3);
    out.d(i) = keep[i]->l;
  }
  return out;
}

LinRows base_rows(const std::vector<ZRow>& rows, bool state_only) {
  std::vector<const ZRow*> keep;
  for (const auto& r : rows)
    if (!state_only || !has_input(r)) keep.push_back(&r);
  LinRows out;
  const int m = static_cast<int>(keep.size());
  out.Cx = Mat::Zero(m, kNx);
  out.d.resize(m);
  if (!state_only) out.Cu = Mat::Zero(m, kNu);
  for (int i = 0; i < m; ++i) {
    out.Cx.row(i) = keep[i]->L.head(kNx).transpose();
    if (!state_only) out.Cu.row(i) = keep[i]->L.tail(kNu).transpose();
    out.d(i) = keep[i]->l;
  }
  return out;
}

LinRows region_rows(const std::vector<HalfSpace>& hs, int nx, double shrink) {
  LinRows out;
  const int m = static_cast<int>(hs.size());
  out.Cx = Mat::Zero(m, nx);
  out.d.resize(m);
  for (int i = 0; i < m; ++i) {
    out.Cx(i, 0) = hs[i].n.x();
    out.Cx(i, 1) = hs[i].n.y();
    out.d(i) = hs[i].l - shrink;
  }
  return out;
}

LinRows rate_rows(double rate_max) {
  LinRows out;
  out.Cx = Mat::Zero(6, kNxExt);
  out.Cu = Mat::Zero(6, kNuExt);
  out.d = Vec::Constant(6, rate_max);
  for (int i = 0; i < 3; ++i) {
    out.Cu(2 * i, i) = 1.0;
    out.Cu(2 * i + 1, i) = -1.0;
  }
  return out;
}

LinRows stack(const std::vector<LinRows>& parts, int nx, int nu) {
  int m = 0;
  bool any_u = false;
  for (const auto& p : parts) {
    m += p.rows();
    any_u = any_u || p.Cu.size() > 0;
  }
  LinRows out;
  out.Cx = Mat::Zero(m, nx);
  out.d.resize(m);
  if (any_u) out.Cu = Mat::Zero(m, nu);
  int r = 0;
  for (const auto& p : parts) {
    out.Cx.middleRows(r, p.rows()) = p.Cx;
    if (p.Cu.size()) out.Cu.middleRows(r, p.rows()) = p.Cu;
    out.d.segment(r, p.rows()) = p.d;
    r += p.rows();
  }
  return out;
}

namespace {

// Steady-state rows on the extended terminal state: v = 0, level attitude,
// hover thrust, level command memory and a yaw command matching the yaw.
void steady_equalities(const ModelParams& mp, Mat& A, Vec& b) {
  A = Mat::Zero(9, kNxExt);
  b = Vec::Zero(9);
  A(0, ix::vx) = A(1, ix::vy) = A(2, ix::vz) = 1.0;
  A(3, ix::phi) = A(4, ix::theta) = 1.0;
  A(5, ix::a) = 1.0;
  b(5) = mp.g;
  A(6, ix::mem_phi) = A(7, ix::mem_theta) = 1.0;
  A(8, ix::mem_psi) = mp.k_psi;
  A(8, ix::psi) = -1.0;
}

// Stage terms are summed per stage, not integrated over the stage duration.
void set_go_costs(OcpSpec& s, const GoCostConfig& cost, const Goal& goal, const ModelParams& mp) {
  s.stage_cost = [cost, goal, mp](int, const Vec& x, const Vec& u, StageCost& c) {
    go_cost(x, &u, goal, cost, false, mp, c);
  };
  s.terminal_cost = [cost, goal, mp](const Vec& x, TerminalCost& c) {
    StageCost g;
    g.gx = Vec::Zero(x.size());
    g.gu = Vec::Zero(kNuExt);
    g.Hxx = Mat::Zero(x.size(), x.size());
    g.Hxu = Mat::Zero(x.size(), kNuExt);
    g.Huu = Mat::Zero(kNuExt, kNuExt);
    go_cost(x, nullptr, goal, cost, true, mp, g);
    c.value += g.value;
    c.gx += g.gx;
    c.Hxx += g.Hxx;
  };
}

Vec rollout(const DiscreteModel& m, const Vec& x, const Vec& u, double h, int substeps,
            std::vector<Vec>* sub) {
  Vec xs = x;
  for (int j = 0; j < substeps; ++j) {
    if (sub) sub->push_back(xs);
    Vec nxt;
    m.step(xs, u, h, nxt, nullptr, nullptr);
    xs = std::move(nxt);
  }
  return xs;
}

}  // namespace

// ---------------------------------------------------------------- tracker

Tmpc::Tmpc(ModelParams mp, SystemBounds b, TmpcConfig cfg, TerminalIngredients ti, Schedule s)
    : model_(mp), bounds_(b), Z_(make_polytope(b)), cfg_(std::move(cfg)), ti_(std::move(ti)), sched_(s) {
  sched_.validate();
}

Vec Tmpc::terminal_law(const Vec& x, const Vec& xr, const Vec& ur) const {
  return terminal_control(x, xr, ur, ti_);
}

OcpSpec Tmpc::build(const Vec& x0, const ReferenceTrajectory& ref, const Plan& plan) const {
  const int N = sched_.n_track();
  if (static_cast<int>(ref.x.size()) < N + 1) throw std::invalid_argument("tmpc: reference too short");
  OcpSpec s;
  s.model = &model_;
  s.N = N;
  s.dt = sched_.Ts_track;
  s.substeps = 1;
  s.x0 = x0;
  s.u_default = ref.u[0];
  const Vec Q = cfg_.Q, R = cfg_.R;
  const double dt = s.dt;
  const auto xr = ref.x;
  const auto ur = ref.u;
  s.stage_cost = [Q, R, dt, xr, ur](int k, const Vec& x, const Vec& u, StageCost& c) {
    const Vec dx = x - xr[k];
    const Vec du = u - ur[k];
    c.value += dt * (dx.dot(Q.cwiseProduct(dx)) + du.dot(R.cwiseProduct(du)));
    c.gx += 2.0 * dt * Q.cwiseProduct(dx);
    c.gu += 2.0 * dt * R.cwiseProduct(du);
    c.Hxx.diagonal() += 2.0 * dt * Q;
    c.Huu.diagonal() += 2.0 * dt * R;
  };
  const Mat P = ti_.P;
  const Vec xT = xr[N];
  s.terminal_cost = [P, xT](const Vec& x, TerminalCost& c) {
    const Vec dx = x - xT;
    c.value += dx.dot(P * dx);
    c.gx += 2.0 * P * dx;
    c.Hxx += 2.0 * P;
  };
  const LinRows sys = base_rows(Z_.rows, false);
  for (int k = 0; k < N; ++k) {
    std::vector<LinRows> parts{sys};
    if (k > 0) {
      const ConvexRegion& reg = region_for_stage(ref.start + k * dt, plan);
      parts.push_back(region_rows(reg.hs, kNx, 0.0));
    }
    s.path.push_back({k, 0, stack(parts, kNx, kNu)});
  }
  s.terminal_rows.push_back(base_rows(Z_.rows, true));
  s.terminal_rows.push_back(region_rows(region_for_stage(ref.start + N * dt, plan).hs, kNx, 0.0));
  s.terminal_quad = TerminalQuad{ti_.P, xT, ti_.alpha * ti_.alpha};
  return s;
}

OcpSolution Tmpc::candidate(const OcpSolution& prev, const Vec& x0, const ReferenceTrajectory& ref) const {
  const int N = sched_.n_track();
  OcpSolution c;
  c.x.push_back(x0);
  for (int k = 0; k < N; ++k) {
    const Vec u = k + 1 < N ? prev.u[k + 1] : terminal_law(c.x[k], ref.x[k], ref.u[k]);
    c.u.push_back(u);
    c.x.push_back(rollout(model_, c.x[k], u, sched_.Ts_track, 1, nullptr));
  }
  return c;
}

OcpSolution Tmpc::from_reference(const ReferenceTrajectory& ref) const {
  const int N = sched_.n_track();
  OcpSolution c;
  c.x.assign(ref.x.begin(), ref.x.begin() + N + 1);
  c.u.assign(ref.u.begin(), ref.u.begin() + N);
  return c;
}

// ---------------------------------------------------------------- planner

Pmpc::Pmpc(ModelParams mp, SystemBounds b, GoCostConfig cost, TerminalIngredients ti, Schedule s,
           Goal goal, DecompParams dp)
    : model_(mp), bounds_(b), cost_(std::move(cost)), ti_(std::move(ti)), sched_(s), goal_(goal), dp_(dp) {
  sched_.validate();
  zbar_ = tightened_rows(make_polytope(b), ti_);
  dp_.tighten = ti_.c_o * ti_.alpha;
}

Vec Pmpc::steady_input() const { return steady_ext_input(model_.params()); }

std::vector<std::vector<Vector2d>> Pmpc::interval_samples(const Plan& plan) const {
  std::vector<std::vector<Vector2d>> out(plan.N());
  for (int m = 0; m < plan.N(); ++m) {
    for (const auto& s : plan.sub[m]) out[m].push_back(s.head<2>());
    out[m].push_back(plan.x[m + 1].head<2>());
  }
  return out;
}

std::vector<ConvexRegion> Pmpc::regions_for_next(const Plan& prev, const GridMap& map) const {
  const int N = prev.N();
  std::vector<Vector2d> nodes;
  for (int m = 1; m <= N; ++m) nodes.push_back(prev.x[m].head<2>());
  nodes.push_back(prev.x[N].head<2>());
  const auto samples = interval_samples(prev);
  std::vector<KeepIn> keep(N);
  const double margin = 0.5 * dp_.robot_radius + dp_.tighten;
  for (int m = 0; m < N; ++m) {
    keep[m].margin = margin;
    if (m + 1 < N) keep[m].points = samples[m + 1];
    else keep[m].points = {prev.x[N].head<2>()};
  }
  return i_decomp(map, nodes, dp_, keep);
}

Plan Pmpc::bootstrap(const Vec& start_ext, const GridMap& map) const {
  const ModelParams& mp = model_.params();
  Plan p;
  p.id = 0;
  p.valid_from = 0.0;
  p.Ts_plan = sched_.Ts_plan();
  p.beta = sched_.beta;
  p.u_steady = steady_ext_input(mp);
  const int N = sched_.n_plan();
  p.x.assign(N + 1, start_ext);
  p.u.assign(N, p.u_steady);
  p.sub.assign(N, std::vector<Vec>(sched_.beta, start_ext));
  // The start must already be a steady state of the model.
  const Vec xd = rollout(model_, start_ext, p.u_steady, sched_.Ts_track, 1, nullptr);
  if ((xd - start_ext).lpNorm<Eigen::Infinity>() > 1e-12)
    throw ConfigError("start state is not a hover steady state");
  const Vec z = (Vec(kNx + kNu) << start_ext.head(kNx), base_input_of(start_ext, p.u_steady)).finished();
  for (const auto& r : zbar_)
    if (r.L.dot(z) > r.l) throw ConfigError("start violates tightened constraint " + r.name);
  std::vector<Vector2d> nodes(N + 1, start_ext.head<2>());
  std::vector<KeepIn> keep(N, KeepIn{{start_ext.head<2>()}, 0.5 * dp_.robot_radius + dp_.tighten});
  p.regions = i_decomp(map, nodes, dp_, keep);
  if (plan_violation(p) > 1e-9) throw ConfigError("start is outside the tightened initial region");
  return p;
}

OcpSpec Pmpc::build(const Plan& prev, const std::vector<ConvexRegion>& regions) const {
  const int N = sched_.n_plan(), nf = sched_.n_fix(), Nf = N - nf;
  if (static_cast<int>(regions.size()) != N) throw std::invalid_argument("pmpc: region count");
  OcpSpec s;
  s.model = &model_;
  s.N = Nf;
  s.dt = sched_.Ts_plan();
  s.substeps = sched_.beta;
  s.x0 = prev.x[1 + nf];
  s.u_default = steady_input();
  set_go_costs(s, cost_, goal_, model_.params());
  const LinRows sys = ext_rows(zbar_, false);
  const LinRows rates = rate_rows(bounds_.rate_max);
  for (int k = 0; k < Nf; ++k) {
    const int m = nf + k;
    for (int j = 0; j < sched_.beta; ++j) {
      std::vector<LinRows> parts{sys};
      if (j == 0) parts.push_back(rates);
      parts.push_back(region_rows(regions[m].tightened, kNxExt, 0.0));
      if (j == 0 && m > 0) parts.push_back(region_rows(regions[m - 1].tightened, kNxExt, 0.0));
      s.path.push_back({k, j, stack(parts, kNxExt, kNuExt)});
    }
  }
  s.terminal_rows.push_back(ext_rows(zbar_, true));
  s.terminal_rows.push_back(region_rows(regions[N - 1].tightened, kNxExt, 0.0));
  steady_equalities(model_.params(), s.term_eq_A, s.term_eq_b);
  return s;
}

OcpSolution Pmpc::candidate(const Plan& prev) const {
  const int N = sched_.n_plan(), nf = sched_.n_fix();
  OcpSolution c;
  for (int m = 1 + nf; m <= N; ++m) c.x.push_back(prev.x[m]);
  for (int m = 1 + nf; m < N; ++m) c.u.push_back(prev.u[m]);
  c.u.push_back(prev.u_steady);
  c.x.push_back(rollout(model_, prev.x[N], prev.u_steady, sched_.Ts_track, sched_.beta, nullptr));
  return c;
}

Plan Pmpc::assemble(const Plan& prev, const OcpSolution& sol, std::vector<ConvexRegion> regions) const {
  const int N = sched_.n_plan(), nf = sched_.n_fix();
  Plan p;
  p.id = prev.id + 1;
  p.valid_from = prev.valid_from + sched_.Ts_plan();
  p.Ts_plan = sched_.Ts_plan();
  p.beta = sched_.beta;
  p.u_steady = steady_input();
  for (int m = 0; m <= nf; ++m) p.x.push_back(prev.x[m + 1]);
  for (int m = 0; m < nf; ++m) {
    p.u.push_back(prev.u[m + 1]);
    p.sub.push_back(prev.sub[m + 1]);
  }
  for (int k = 0; k < N - nf; ++k) {
    p.u.push_back(sol.u[k]);
    std::vector<Vec> sub;
    p.x.push_back(rollout(model_, p.x.back(), sol.u[k], sched_.Ts_track, sched_.beta, &sub));
    p.sub.push_back(std::move(sub));
  }
  p.regions = std::move(regions);
  for (int m = 0; m < N; ++m) p.regions[m].interval = m;
  return p;
}

double Pmpc::shift_violation(const Plan& prev, const std::vector<ConvexRegion>& regions) const {
  const auto samples = interval_samples(prev);
  const int N = prev.N();
  double worst = -1e300;
  for (int m = 0; m < N; ++m) {
    const std::vector<Vector2d> pts =
        m + 1 < N ? samples[m + 1] : std::vector<Vector2d>{prev.x[N].head<2>()};
    for (const auto& p : pts) worst = std::max(worst, regions[m].violation(p, true));
  }
  return worst;
}

double Pmpc::plan_violation(const Plan& plan) const {
  const int N = plan.N();
  double worst = -1e300;
  auto eval = [&](const LinRows& r, const Vec& x, const Vec* u) {
    Vec g = r.Cx * x - r.d;
    if (u && r.Cu.size()) g += r.Cu * *u;
    if (g.size()) worst = std::max(worst, g.maxCoeff());
  };
  const LinRows sys = ext_rows(zbar_, false);
  const LinRows rates = rate_rows(bounds_.rate_max);
  for (int m = 0; m < N; ++m) {
    for (int j = 0; j < plan.beta; ++j) {
      const Vec& xs = plan.sub[m][j];
      eval(sys, xs, &plan.u[m]);
      if (j == 0) eval(rates, xs, &plan.u[m]);
      eval(region_rows(plan.regions[m].tightened, kNxExt, 0.0), xs, nullptr);
      if (j == 0 && m > 0) eval(region_rows(plan.regions[m - 1].tightened, kNxExt, 0.0), xs, nullptr);
    }
  }
  eval(ext_rows(zbar_, true), plan.x[N], nullptr);
  eval(region_rows(plan.regions[N - 1].tightened, kNxExt, 0.0), plan.x[N], nullptr);
  Mat A;
  Vec b;
  steady_equalities(model_.params(), A, b);
  worst = std::max(worst, (A * plan.x[N] - b).lpNorm<Eigen::Infinity>());
  return worst;
}

// ---------------------------------------------------------------- single layer

Smpc::Smpc(ModelParams mp, SystemBounds b, SmpcConfig cfg, Goal goal, DecompParams dp)
    : model_(mp), bounds_(b), Z_(make_polytope(b)), cfg_(std::move(cfg)), goal_(goal), dp_(dp) {
  dp_.tighten = 0.0;
  if (cfg_.n_stages() < 1) throw ConfigError("smpc horizon must cover at least one stage");
}

std::vector<ConvexRegion> Smpc::regions_for_next(const OcpSolution* prev, const Vec& x0,
                                                 const GridMap& map,
                                                 const std::vector<ConvexRegion>* fallback) const {
  const int N = cfg_.n_stages();
  std::vector<Vector2d> nodes;
  if (prev && static_cast<int>(prev->x.size()) == N + 1) {
    for (int m = 1; m <= N; ++m) nodes.push_back(prev->x[m].head<2>());
    nodes.push_back(prev->x[N].head<2>());
  } else {
    nodes.assign(N + 1, x0.head<2>());
  }
  std::vector<ConvexRegion> out;
  for (int m = 0; m < N; ++m) {
    try {
      out.push_back(decompose_segment(map, nodes[m], nodes[m + 1], dp_));
    } catch (const DecompError&) {
      if (!fallback || fallback->empty()) throw;
      const std::size_t idx = std::min<std::size_t>(m + 1, fallback->size() - 1);
      out.push_back((*fallback)[idx]);
    }
    out.back().interval = m;
  }
  return out;
}

OcpSpec Smpc::build(const Vec& x0, const std::vector<ConvexRegion>& regions) const {
  const int N = cfg_.n_stages();
  OcpSpec s;
  s.model = &model_;
  s.N = N;
  s.dt = cfg_.Ts;
  s.substeps = 1;
  s.x0 = x0;
  s.u_default = steady_ext_input(model_.params());
  s.slack_quad = cfg_.slack_quad;
  s.slack_lin = cfg_.slack_lin;
  set_go_costs(s, cfg_.cost, goal_, model_.params());
  const LinRows sys = stack({ext_rows(Z_.rows, false), rate_rows(bounds_.rate_max)}, kNxExt, kNuExt);
  for (int k = 0; k < N; ++k) {
    s.path.push_back({k, 0, sys});
    if (k > 0) {
      LinRows soft = region_rows(regions[k - 1].hs, kNxExt, cfg_.safety);
      soft.soft = true;
      s.path.push_back({k, 0, soft});
    }
  }
  s.terminal_rows.push_back(ext_rows(Z_.rows, true));
  LinRows soft = region_rows(regions[N - 1].hs, kNxExt, cfg_.safety);
  soft.soft = true;
  s.terminal_rows.push_back(soft);
  steady_equalities(model_.params(), s.term_eq_A, s.term_eq_b);
  return s;
}

OcpSolution Smpc::warm(const OcpSolution* prev, const Vec& x0) const {
  const int N = cfg_.n_stages();
  OcpSolution w;
  if (prev && static_cast<int>(prev->u.size()) == N) {
    const Vec us = steady_ext_input(model_.params());
    w = shift_warm_start(*prev, 1, [us](int, const Vec&) { return us; }, model_, cfg_.Ts, 1);
  } else {
    w.x.assign(N + 1, x0);
    w.u.assign(N, steady_ext_input(model_.params()));
  }
  w.x[0] = x0;
  return w;
}

}  // namespace hmpc
