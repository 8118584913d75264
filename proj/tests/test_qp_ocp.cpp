#include "doctest.h"
#include "hmpc/controllers.hpp"
#include "hmpc/ocp.hpp"
#include "hmpc/qp.hpp"
#include "oracles.hpp"

using namespace hmpc;

namespace {

using oracle::DoubleIntegrator;
using oracle::Lqr;
using oracle::lqr_spec;

// Condensed input-only problem: x = Sx x0 + Su U.
void condense(const DoubleIntegrator& m, const Lqr& w, int N, double dt, const Vec& x0, Mat& H, Vec& f) {
  Mat A, B;
  Vec tmp;
  m.step(Vec::Zero(2), Vec::Zero(1), dt, tmp, &A, &B);
  Mat Sx = Mat::Zero(2 * (N + 1), 2), Su = Mat::Zero(2 * (N + 1), N);
  Sx.block(0, 0, 2, 2).setIdentity();
  for (int k = 1; k <= N; ++k) {
    Sx.block(2 * k, 0, 2, 2) = A * Sx.block(2 * (k - 1), 0, 2, 2);
    Su.block(2 * k, 0, 2, N) = A * Su.block(2 * (k - 1), 0, 2, N);
    Su(2 * k, k - 1) += B(0, 0);
    Su(2 * k + 1, k - 1) += B(1, 0);
  }
  Mat Qb = Mat::Zero(2 * (N + 1), 2 * (N + 1));
  for (int k = 0; k < N; ++k) Qb.block(2 * k, 2 * k, 2, 2) = w.Q;
  Qb.block(2 * N, 2 * N, 2, 2) = w.Pf;
  H = 2.0 * (Su.transpose() * Qb * Su + w.R(0, 0) * Mat::Identity(N, N));
  f = 2.0 * Su.transpose() * Qb * Sx * x0;
}

}  // namespace

TEST_CASE("qp: inequality-constrained analytic solution") {
  QpProblem qp;
  qp.H = Mat::Identity(2, 2);
  qp.f = -Vec::Ones(2);
  qp.A = Mat::Ones(1, 2);
  qp.b = Vec::Ones(1);
  const QpResult r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::solved);
  CHECK(r.z(0) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(r.z(1) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(r.lam(0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("qp: equality-constrained KKT solution") {
  QpProblem qp;
  qp.H = Mat::Identity(3, 3);
  qp.f = Vec::Zero(3);
  qp.A = Mat::Zero(0, 3);
  qp.b = Vec::Zero(0);
  qp.E = Mat::Ones(1, 3);
  qp.e = Vec::Constant(1, 3.0);
  const QpResult r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::solved);
  CHECK((r.z - Vec::Ones(3)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("qp: inactive constraints leave the unconstrained minimizer") {
  QpProblem qp;
  qp.H = (Mat(2, 2) << 4, 1, 1, 2).finished();
  qp.f = (Vec(2) << 1, 1).finished();
  qp.A = Mat::Identity(2, 2);
  qp.b = Vec::Constant(2, 10.0);
  const QpResult r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::solved);
  const Vec z = -qp.H.ldlt().solve(qp.f);
  CHECK((r.z - z).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("qp: infeasible constraints are detected") {
  QpProblem qp;
  qp.H = Mat::Identity(1, 1);
  qp.f = Vec::Zero(1);
  qp.A = (Mat(2, 1) << 1, -1).finished();
  qp.b = (Vec(2) << -1, -1).finished();
  const QpResult r = solve_qp(qp);
  CHECK(r.status != QpStatus::solved);
}

TEST_CASE("ocp: unconstrained double integrator matches the Riccati recursion") {
  DoubleIntegrator m;
  Lqr w;
  const int N = 12;
  const double dt = 0.1;
  const Vec x0 = (Vec(2) << 1.0, -0.5).finished();
  double cost = 0.0;
  const std::vector<double> u = oracle::riccati_inputs(m, w, N, dt, x0, &cost);
  const OcpSpec spec = lqr_spec(m, w, N, dt, x0);
  const OcpSolution sol = solve_ocp(spec, nullptr);
  REQUIRE(sol.status == SolveStatus::solved);
  double worst = 0.0;
  for (int k = 0; k < N; ++k) worst = std::max(worst, std::abs(sol.u[k](0) - u[k]));
  CHECK(worst < 1e-6);
  CHECK(sol.objective == doctest::Approx(cost).epsilon(1e-8));
  CHECK(sol.defect < 1e-12);
}

TEST_CASE("ocp: input-constrained double integrator matches the condensed QP") {
  DoubleIntegrator m;
  Lqr w;
  const int N = 10;
  const double dt = 0.2;
  const Vec x0 = (Vec(2) << 2.0, 1.0).finished();
  const double umax = 0.6;
  OcpSpec spec = lqr_spec(m, w, N, dt, x0);
  for (int k = 0; k < N; ++k) {
    LinRows r;
    r.Cx = Mat::Zero(2, 2);
    r.Cu = (Mat(2, 1) << 1, -1).finished();
    r.d = Vec::Constant(2, umax);
    spec.path.push_back({k, 0, r});
  }
  const OcpSolution sol = solve_ocp(spec, nullptr);
  REQUIRE(sol.status == SolveStatus::solved);

  // Oracle: accelerated projected gradient on the condensed box-constrained QP.
  Mat H;
  Vec f;
  condense(m, w, N, dt, x0, H, f);
  const double L = Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues().maxCoeff();
  Vec U = Vec::Zero(N), Y = U;
  double t = 1.0;
  for (int it = 0; it < 200000; ++it) {
    const Vec Un = (Y - (H * Y + f) / L).cwiseMax(-umax).cwiseMin(umax);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Y = Un + ((t - 1.0) / tn) * (Un - U);
    U = Un;
    t = tn;
  }
  double worst = 0.0;
  int active = 0;
  for (int k = 0; k < N; ++k) {
    worst = std::max(worst, std::abs(sol.u[k](0) - U(k)));
    if (std::abs(U(k)) > umax - 1e-9) ++active;
  }
  CHECK(active > 0);
  CHECK(worst < 1e-6);
}

TEST_CASE("ocp: terminal equality is met on the nonlinear model") {
  ModelParams mp;
  ExtendedModel model(mp);
  OcpSpec s;
  s.model = &model;
  s.N = 6;
  s.dt = 0.5;
  s.substeps = 10;
  s.x0 = hover_ext_state({0, 0, 1}, 0, mp);
  s.u_default = steady_ext_input(mp);
  Goal g;
  g.p = {0.6, -0.3, 1.2};
  GoCostConfig cc;
  s.stage_cost = [&](int, const Vec& x, const Vec& u, StageCost& c) { go_cost(x, &u, g, cc, false, mp, c); };
  s.terminal_cost = [&](const Vec& x, TerminalCost& tc) {
    StageCost c;
    c.gx = Vec::Zero(kNxExt);
    c.gu = Vec::Zero(kNuExt);
    c.Hxx = Mat::Zero(kNxExt, kNxExt);
    c.Hxu = Mat::Zero(kNxExt, kNuExt);
    c.Huu = Mat::Zero(kNuExt, kNuExt);
    go_cost(x, nullptr, g, cc, true, mp, c);
    tc.value = c.value;
    tc.gx = c.gx;
    tc.Hxx = c.Hxx;
  };
  // Velocity and thrust at rest at the end.
  s.term_eq_A = Mat::Zero(3, kNxExt);
  for (int i = 0; i < 3; ++i) s.term_eq_A(i, ix::vx + i) = 1.0;
  s.term_eq_b = Vec::Zero(3);
  s.path.push_back({0, 0, rate_rows(60.0 * M_PI / 180.0)});
  for (int k = 1; k < s.N; ++k) s.path.push_back({k, 0, rate_rows(60.0 * M_PI / 180.0)});
  const OcpSolution sol = solve_ocp(s, nullptr);
  CHECK(sol.status == SolveStatus::solved);
  CHECK(sol.defect < 1e-8);
  CHECK(sol.violation < 1e-8);
  CHECK(sol.x.back().segment<3>(ix::vx).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sol.x.back().head<3>() - s.x0.head<3>()).norm() > 0.05);
  CHECK(kkt_residual(s, sol) < 1e-3);
}

TEST_CASE("ocp: spec validation") {
  DoubleIntegrator m;
  Lqr w;
  OcpSpec s = lqr_spec(m, w, 3, 0.1, Vec::Zero(2));
  s.N = 0;
  CHECK_THROWS(s.validate());
}

TEST_CASE("ocp: shifted warm start rolls the model forward") {
  DoubleIntegrator m;
  Lqr w;
  const OcpSpec spec = lqr_spec(m, w, 8, 0.1, (Vec(2) << 1.0, 0.0).finished());
  const OcpSolution sol = solve_ocp(spec, nullptr);
  const OcpSolution sh =
      shift_warm_start(sol, 2, [](int, const Vec&) { return Vec::Zero(1); }, m, 0.1, 1);
  REQUIRE(sh.u.size() == sol.u.size());
  CHECK(sh.u[0] == sol.u[2]);
  CHECK((sh.x[0] - sol.x[2]).norm() < 1e-14);
  CHECK(sh.u.back()(0) == 0.0);
}
