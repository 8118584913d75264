#include <random>

#include "doctest.h"
#include "hmpc/controllers.hpp"
#include "hmpc/sim.hpp"
#include "support.hpp"

using namespace hmpc;

namespace {

StageCost blank_cost() {
  StageCost c;
  c.gx = Vec::Zero(kNxExt);
  c.gu = Vec::Zero(kNuExt);
  c.Hxx = Mat::Zero(kNxExt, kNxExt);
  c.Hxu = Mat::Zero(kNxExt, kNuExt);
  c.Huu = Mat::Zero(kNuExt, kNuExt);
  return c;
}

double cost_value(const Vec& x, const Vec* u, const Goal& g, const GoCostConfig& cc, bool terminal,
                  const ModelParams& mp) {
  StageCost c = blank_cost();
  go_cost(x, u, g, cc, terminal, mp, c);
  return c.value;
}

}  // namespace

TEST_CASE("huber penalty") {
  CHECK(huber(0.0, 1.0) == 0.0);
  CHECK(huber(0.5, 1.0) == 0.125);
  CHECK(huber(1.0, 1.0) == 0.5);
  CHECK(huber(3.0, 1.0) == 2.5);
  // Continuous slope at the switch point.
  const double e = 1e-7;
  CHECK((huber(1.0 + e, 1.0) - huber(1.0 - e, 1.0)) / (2 * e) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("goal cost gradient matches differences") {
  ModelParams mp;
  GoCostConfig cc;
  Goal g;
  g.p = {3.0, -1.0, 1.5};
  g.yaw = 0.3;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (ThrustReg reg : {ThrustReg::hover_centered, ThrustReg::as_written}) {
    cc.thrust_reg = reg;
    for (int t = 0; t < 30; ++t) {
      Vec x(kNxExt), in(kNuExt);
      for (int i = 0; i < kNxExt; ++i) x(i) = u(rng);
      x(ix::a) = 9.81 + u(rng);
      x.head<2>() *= 4.0;  // both sides of the Huber switch
      for (int i = 0; i < kNuExt; ++i) in(i) = u(rng);
      in(3) += 9.81;
      for (bool terminal : {false, true}) {
        StageCost c = blank_cost();
        go_cost(x, terminal ? nullptr : &in, g, cc, terminal, mp, c);
        for (int i = 0; i < kNxExt; ++i) {
          Vec xp = x, xm = x;
          xp(i) += 1e-4;
          xm(i) -= 1e-4;
          const double fd = (cost_value(xp, terminal ? nullptr : &in, g, cc, terminal, mp) -
                             cost_value(xm, terminal ? nullptr : &in, g, cc, terminal, mp)) / 2e-4;
          CHECK(std::abs(c.gx(i) - fd) <= 1e-6 * (1.0 + std::abs(fd) + c.value));
        }
        if (terminal) continue;
        for (int i = 0; i < kNuExt; ++i) {
          Vec up = in, um = in;
          up(i) += 1e-4;
          um(i) -= 1e-4;
          const double fd = (cost_value(x, &up, g, cc, false, mp) - cost_value(x, &um, g, cc, false, mp)) / 2e-4;
          CHECK(std::abs(c.gu(i) - fd) <= 1e-6 * (1.0 + std::abs(fd) + c.value));
        }
      }
    }
  }
}

TEST_CASE("thrust regularization at hover") {
  ModelParams mp;
  Goal g;
  g.p = {1.0, 2.0, 1.0};
  const Vec x = hover_ext_state(g.p, 0.0, mp);
  const Vec u = steady_ext_input(mp);
  GoCostConfig cc;
  cc.thrust_reg = ThrustReg::hover_centered;
  CHECK(cost_value(x, &u, g, cc, false, mp) == 0.0);
  cc.thrust_reg = ThrustReg::as_written;
  const double expect = cc.w_a * std::pow(mp.g * mp.g - mp.g, 2) + cc.U(3) * mp.g * mp.g;
  CHECK(cost_value(x, &u, g, cc, false, mp) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("region index is right-closed") {
  const double Ts = 0.5;
  const int N = 5;
  CHECK(region_index(0.0, Ts, N) == 0);
  CHECK(region_index(0.25, Ts, N) == 0);
  CHECK(region_index(0.5, Ts, N) == 0);
  CHECK(region_index(0.55, Ts, N) == 1);
  CHECK(region_index(1.0, Ts, N) == 1);
  CHECK(region_index(2.5, Ts, N) == 4);
  CHECK_THROWS_AS(region_index(2.6, Ts, N), std::out_of_range);
  CHECK_THROWS_AS(region_index(-0.1, Ts, N), std::out_of_range);
}

TEST_CASE("schedule derived counts and validation") {
  Schedule s;
  CHECK(s.n_track() == 10);
  CHECK(s.n_fix() == 1);
  CHECK(s.n_plan() == 5);
  CHECK_NOTHROW(s.validate());
  s.beta = 4;
  CHECK(s.n_fix() == 3);
  CHECK(s.n_plan() == 13);
  CHECK_NOTHROW(s.validate());
  s.beta = 10;
  s.T_plan = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.T_plan = 2.0;
  CHECK_NOTHROW(s.validate());
  s.beta = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.beta = 10;
  s.T_track = 0.52;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("tightened rows subtract the scaled tighteners") {
  const TerminalIngredients& ti = test::ingredients();
  const PolytopeZ Z = make_polytope(SystemBounds{});
  const auto rows = tightened_rows(Z, ti);
  REQUIRE(rows.size() == Z.rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) CHECK(rows[j].l == Z.rows[j].l - ti.c_s(j) * ti.alpha);
  TerminalIngredients big = ti;
  big.alpha *= 1e4;
  CHECK_THROWS_AS(tightened_rows(Z, big), ConfigError);
  TerminalIngredients wrong = ti;
  wrong.c_s = Vec::Ones(3);
  CHECK_THROWS_AS(tightened_rows(Z, wrong), ConfigError);
}

TEST_CASE("bootstrap plan hovers at the start inside identical regions") {
  const Config cfg = test::scenario_config("two_obstacle");
  const auto& sc = cfg.scenario;
  const TerminalIngredients& ti = test::ingredients();
  const GridMap map = build_map(sc);
  const Plan p = bootstrap(sc, ti, map);
  REQUIRE(p.N() == sc.schedule.n_plan());
  ExtendedModel model(sc.model);
  double defect = 0.0;
  for (int k = 0; k < p.N(); ++k) {
    Vec xn = p.x[k];
    for (int j = 0; j < p.beta; ++j) {
      CHECK(p.sub[k][j] == xn);
      Vec next;
      model.step(xn, p.u[k], sc.schedule.Ts_track, next, nullptr, nullptr);
      xn = next;
    }
    defect = std::max(defect, (xn - p.x[k + 1]).cwiseAbs().maxCoeff());
  }
  CHECK(defect <= 1e-12);
  for (std::size_t i = 1; i < p.regions.size(); ++i) {
    REQUIRE(p.regions[i].hs.size() == p.regions[0].hs.size());
    for (std::size_t j = 0; j < p.regions[i].hs.size(); ++j) {
      CHECK(p.regions[i].hs[j].n == p.regions[0].hs[j].n);
      CHECK(p.regions[i].hs[j].l == p.regions[0].hs[j].l);
    }
  }
  // Tightened system rows hold at the hover point.
  const auto rows = tightened_rows(make_polytope(sc.bounds), ti);
  Vec z(kNx + kNu);
  z << p.x[0].head(kNx), base_input_of(p.x[0], p.u[0]);
  for (const auto& r : rows) CHECK(r.L.dot(z) <= r.l);
  for (const auto& r : p.regions) CHECK(r.contains_tight(p.x[0].head<2>()));
}

TEST_CASE("reference subsampling walks the plan at tracker rate") {
  const Config cfg = test::scenario_config("two_obstacle");
  const auto& sc = cfg.scenario;
  const GridMap map = build_map(sc);
  Plan p = bootstrap(sc, test::ingredients(), map);
  // Mark each substep so the sample order is visible.
  for (int k = 0; k < p.N(); ++k)
    for (int j = 0; j < p.beta; ++j) p.sub[k][j](0) = k * p.beta + j;
  p.x[p.N()](0) = p.N() * p.beta;
  p.valid_from = 1.0;
  const ReferenceTrajectory r = subsample_reference(p, 1.5, 12, sc.schedule.Ts_track);
  REQUIRE(r.x.size() == 13u);
  for (int i = 0; i <= 12; ++i) CHECK(r.x[i](0) == 10 + i);
  const ReferenceTrajectory tail = subsample_reference(p, 1.0 + 2.4, 10, sc.schedule.Ts_track);
  CHECK(tail.x.back()(0) == p.N() * p.beta);
  CHECK_THROWS_AS(subsample_reference(p, 0.5, 10, sc.schedule.Ts_track), std::out_of_range);
}

TEST_CASE("terminal law of the tracker appends the feedback") {
  const Config cfg = test::scenario_config("two_obstacle");
  const auto& sc = cfg.scenario;
  const TerminalIngredients& ti = test::ingredients();
  Tmpc tm(sc.model, sc.bounds, sc.tmpc, ti, sc.schedule);
  const Vec xr = QuadState::hover({0, 0, 1}, 0, sc.model).flat();
  const Vec ur = QuadInput::hover(0, sc.model).flat();
  Vec x = xr;
  x(ix::vx) = 0.05;
  CHECK((tm.terminal_law(x, xr, ur) - terminal_control(x, xr, ur, ti)).norm() == 0.0);
}
