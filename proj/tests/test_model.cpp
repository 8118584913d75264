#include <random>

#include "doctest.h"
#include "hmpc/model.hpp"
#include "hmpc/sim.hpp"
#include "oracles.hpp"

using namespace hmpc;

namespace {

constexpr double kDeg = M_PI / 180.0;

struct Sampler {
  std::mt19937_64 rng{42};
  double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  // Random (x, u) inside the default constraint set.
  void feasible(Vec& x, Vec& u) {
    x.resize(kNx);
    u.resize(kNu);
    x << uni(-10, 10), uni(-10, 10), uni(0.5, 3.5), uni(-2, 2), uni(-2, 2), uni(-2, 2), uni(-30, 30) * kDeg,
        uni(-30, 30) * kDeg, uni(-30, 30) * kDeg, uni(5, 15);
    u << uni(-30, 30) * kDeg, uni(-30, 30) * kDeg, uni(-30, 30) * kDeg, uni(5, 15);
  }
};

}  // namespace

TEST_CASE("dynamics match the rotation-matrix form") {
  ModelParams mp;
  Sampler s;
  for (int t = 0; t < 100; ++t) {
    Vec x, u;
    s.feasible(x, u);
    CHECK((eval_dynamics(x, u, mp) - oracle::deriv(x, u, mp)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("hover is an equilibrium") {
  ModelParams mp;
  const Vec x = QuadState::hover({1, 2, 3}, 0.4, mp).flat();
  const Vec u = QuadInput::hover(0.4, mp).flat();
  CHECK(eval_dynamics(x, u, mp).cwiseAbs().maxCoeff() < 1e-12);
  Vec xn;
  BaseModel(mp).step(x, u, 0.05, xn, nullptr, nullptr);
  CHECK((xn - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analytic Jacobians match central differences") {
  ModelParams mp;
  Sampler s;
  std::vector<std::pair<Vec, Vec>> pts;
  for (int t = 0; t < 100; ++t) {
    Vec x, u;
    s.feasible(x, u);
    pts.emplace_back(x, u);
  }
  CHECK(oracle::jacobian_gap(pts, mp) < 1e-5);
}

TEST_CASE("discrete step Jacobians match differences of the step") {
  ModelParams mp;
  Sampler s;
  BaseModel base(mp);
  ExtendedModel ext(mp);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    Vec x, u;
    s.feasible(x, u);
    Vec xn;
    Mat A, B;
    base.step(x, u, 0.05, xn, &A, &B);
    for (int j = 0; j < kNx + kNu; ++j) {
      Vec xp = x, xm = x, up = u, um = u;
      if (j < kNx) xp(j) += 1e-6, xm(j) -= 1e-6;
      else up(j - kNx) += 1e-6, um(j - kNx) -= 1e-6;
      Vec fp, fm;
      base.step(xp, up, 0.05, fp, nullptr, nullptr);
      base.step(xm, um, 0.05, fm, nullptr, nullptr);
      const Vec col = (fp - fm) / 2e-6;
      worst = std::max(worst, (col - (j < kNx ? A.col(j) : B.col(j - kNx))).cwiseAbs().maxCoeff());
    }
    Vec xe(kNxExt), ue(kNuExt);
    xe << x, u.head<3>();
    ue << s.uni(-1, 1), s.uni(-1, 1), s.uni(-1, 1), u(3);
    ext.step(xe, ue, 0.05, xn, &A, &B);
    for (int j = 0; j < kNxExt + kNuExt; ++j) {
      Vec xp = xe, xm = xe, up = ue, um = ue;
      if (j < kNxExt) xp(j) += 1e-6, xm(j) -= 1e-6;
      else up(j - kNxExt) += 1e-6, um(j - kNxExt) -= 1e-6;
      Vec fp, fm;
      ext.step(xp, up, 0.05, fp, nullptr, nullptr);
      ext.step(xm, um, 0.05, fm, nullptr, nullptr);
      const Vec col = (fp - fm) / 2e-6;
      worst = std::max(worst, (col - (j < kNxExt ? A.col(j) : B.col(j - kNxExt))).cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("rk4 one-step error shrinks at fourth order") {
  ModelParams mp;
  Sampler s;
  auto f = [&](const Vec& x, const Vec& u) { return eval_dynamics(x, u, mp); };
  for (int t = 0; t < 20; ++t) {
    Vec x, u;
    s.feasible(x, u);
    const double h = 0.05;
    const double e1 = (rk4_step(f, x, u, h) - oracle::rk4(x, u, h, 4000, mp)).cwiseAbs().maxCoeff();
    const double e2 = (rk4_step(f, x, u, h / 2) - oracle::rk4(x, u, h / 2, 4000, mp)).cwiseAbs().maxCoeff();
    CHECK(e1 / e2 >= 12.0);
  }
}

TEST_CASE("rk4 with substeps converges to the fine-step oracle") {
  ModelParams mp;
  Sampler s;
  auto f = [&](const Vec& x, const Vec& u) { return eval_dynamics(x, u, mp); };
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    Vec x, u;
    s.feasible(x, u);
    worst = std::max(worst, (rk4_step(f, x, u, 0.05, 50) - oracle::rk4(x, u, 0.05, 4000, mp)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("rk4 single step near steady input is close to the Euler oracle") {
  // With the input equal to the current attitude and thrust there is no fast
  // first-order transient, and one 50 ms step stays close to fine integration.
  ModelParams mp;
  Sampler s;
  auto f = [&](const Vec& x, const Vec& u) { return eval_dynamics(x, u, mp); };
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    Vec x, u;
    s.feasible(x, u);
    u = x.segment<4>(6);
    worst = std::max(worst, (rk4_step(f, x, u, 0.05) - oracle::rk4(x, u, 0.05, 4000, mp)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-6);
  // The Euler oracle with 1000 substeps carries its own first-order error.
  Vec x, u;
  s.feasible(x, u);
  CHECK((oracle::euler(x, u, 0.05, 1000, mp) - oracle::rk4(x, u, 0.05, 4000, mp)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("extended model base part is bit-identical to the base model") {
  ModelParams mp;
  Sampler s;
  BaseModel base(mp);
  ExtendedModel ext(mp);
  for (int t = 0; t < 50; ++t) {
    Vec x, u;
    s.feasible(x, u);
    Vec xe(kNxExt), ue(kNuExt);
    xe << x, u.head<3>();
    ue << 0.0, 0.0, 0.0, u(3);
    Vec xb, xx;
    base.step(x, u, 0.05, xb, nullptr, nullptr);
    ext.step(xe, ue, 0.05, xx, nullptr, nullptr);
    CHECK(xx.head(kNx) == xb);
    CHECK(base_input_of(xe, ue) == u);
  }
}

TEST_CASE("extended memory integrates the rate input") {
  ModelParams mp;
  ExtendedModel ext(mp);
  Vec xe = Vec::Zero(kNxExt), ue(kNuExt);
  xe.head(kNx) = QuadState::hover({0, 0, 1}, 0, mp).flat();
  ue << 0.2, -0.1, 0.05, mp.g;
  Vec xn;
  ext.step(xe, ue, 0.05, xn, nullptr, nullptr);
  CHECK(xn(ix::mem_phi) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(xn(ix::mem_theta) == doctest::Approx(-0.005).epsilon(1e-12));
  CHECK(xn(ix::mem_psi) == doctest::Approx(0.0025).epsilon(1e-12));
}

TEST_CASE("model parameter validation") {
  ModelParams mp;
  mp.tau_a = 0.0;
  CHECK_THROWS_AS(mp.validate(), std::invalid_argument);
  SystemBounds b;
  b.a_min = 20.0;
  CHECK_THROWS_AS(make_polytope(b), std::invalid_argument);
}

TEST_CASE("constraint polytope evaluation") {
  SystemBounds b;
  const PolytopeZ Z = make_polytope(b);
  CHECK(Z.n_s() == 28);
  ModelParams mp;
  const Vec x = QuadState::hover({0, 0, 1}, 0, mp).flat();
  const Vec u = QuadInput::hover(0, mp).flat();
  CHECK(eval_sys_constraints(x, u, Z).maxCoeff() < 0.0);
  Vec x2 = x;
  x2(ix::vx) = 2.5;
  CHECK(eval_sys_constraints(x2, u, Z).maxCoeff() == doctest::Approx(0.5));
}

TEST_CASE("exact plant reproduces the controller model bit for bit") {
  Scenario sc;
  Plant plant(sc);
  BaseModel m(sc.model);
  Sampler s;
  for (int t = 0; t < 20; ++t) {
    Vec x, u;
    s.feasible(x, u);
    Vec ref;
    m.step(x, u, 0.05, ref, nullptr, nullptr);
    CHECK(plant.step(x, u, 0.05) == ref);
  }
}

TEST_CASE("mismatch plant: positive thrust bias makes the altitude drift up") {
  Scenario sc;
  sc.plant.mode = PlantMode::mismatch;
  sc.plant.param_spread = 0.0;
  sc.plant.disturbance = 0.0;
  sc.plant.thrust_bias = 0.2;
  Plant plant(sc);
  Vec x = QuadState::hover({0, 0, 1}, 0, sc.model).flat();
  const Vec u = QuadInput::hover(0, sc.model).flat();
  for (int i = 0; i < 20; ++i) x = plant.step(x, u, 0.05);
  CHECK(x(ix::pz) == doctest::Approx(1.0 + 0.5 * 0.2 * 1.0 * 1.0).epsilon(1e-9));
  CHECK(x(ix::vz) > 0.0);
}

TEST_CASE("mismatch plant: seeded disturbances are reproducible") {
  Scenario sc;
  sc.plant.mode = PlantMode::mismatch;
  sc.plant.seed = 7;
  Plant a(sc), b(sc);
  CHECK(a.params() == b.params());
  CHECK(!(a.params() == sc.model));
  Vec xa = QuadState::hover({0, 0, 1}, 0, sc.model).flat(), xb = xa;
  const Vec u = QuadInput::hover(0, sc.model).flat();
  for (int i = 0; i < 50; ++i) {
    xa = a.step(xa, u, 0.05);
    xb = b.step(xb, u, 0.05);
    CHECK(a.last_disturbance().cwiseAbs().maxCoeff() <= sc.plant.disturbance);
  }
  CHECK(xa == xb);
  sc.plant.seed = 8;
  Plant c(sc);
  CHECK(!(c.params() == a.params()));
}

TEST_CASE("plant rejects non-finite states") {
  Scenario sc;
  Plant plant(sc);
  Vec x = QuadState::hover({0, 0, 1}, 0, sc.model).flat();
  x(0) = std::nan("");
  CHECK_THROWS_AS(plant.step(x, QuadInput::hover(0, sc.model).flat(), 0.05), NumericError);
}
