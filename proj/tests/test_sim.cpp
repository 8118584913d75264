#include "doctest.h"
#include "hmpc/io.hpp"
#include "hmpc/sim.hpp"
#include "support.hpp"

using namespace hmpc;

namespace {

Scenario two_obstacle() { return test::scenario_config("two_obstacle").scenario; }

const RunLog& exact_run() {
  static const RunLog log = run_closed_loop(two_obstacle(), test::ingredients());
  return log;
}

}  // namespace

TEST_CASE("a start inside the goal radius ends at the first tick") {
  Scenario sc = two_obstacle();
  sc.goal.p = sc.start;
  sc.goal.yaw = sc.start_yaw;
  const RunLog log = run_closed_loop(sc, test::ingredients());
  CHECK(log.summary.goal_reached);
  CHECK(log.summary.goal_time == 0.0);
  CHECK(log.ticks.size() <= 1u);
}

TEST_CASE("exact run reaches the goal and keeps its invariants") {
  const RunLog& log = exact_run();
  const Summary& s = log.summary;
  INFO(s.error);
  CHECK(s.error.empty());
  CHECK(s.goal_reached);
  CHECK(s.invariants_ok);
  CHECK(s.fast_failures == 0);
  CHECK(s.plan_failures == 0);
  CHECK(s.min_clearance >= 0.0);
  CHECK(s.max_tracking_error <= 1e-3);
  CHECK(s.z_max - s.z_min <= 0.05);
  CHECK(s.max_slack == 0.0);
}

TEST_CASE("exact plant follows the tracker prediction") {
  const Scenario sc = two_obstacle();
  const RunLog& log = exact_run();
  const BaseModel m(sc.model);
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < log.ticks.size(); ++i) {
    Vec pred;
    m.step(log.ticks[i].x, log.ticks[i].u, sc.schedule.Ts_track, pred, nullptr, nullptr);
    worst = std::max(worst, (pred - log.ticks[i + 1].x).cwiseAbs().maxCoeff());
  }
  CHECK(worst == 0.0);
}

TEST_CASE("tick and cycle timestamps are consistent") {
  const Scenario sc = two_obstacle();
  const RunLog& log = exact_run();
  for (std::size_t i = 0; i < log.ticks.size(); ++i) {
    CHECK(log.ticks[i].tick == static_cast<long>(i));
    CHECK(log.ticks[i].t == doctest::Approx(i * sc.schedule.Ts_track).epsilon(1e-12));
  }
  for (std::size_t i = 1; i < log.cycles.size(); ++i) {
    CHECK(log.cycles[i].valid_from > log.cycles[i - 1].valid_from);
    CHECK(log.cycles[i].launched < log.cycles[i].valid_from);
    CHECK(log.cycles[i].plan_id == log.cycles[i - 1].plan_id + 1);
  }
  // A tick only ever reads a plan that is already valid.
  for (const auto& t : log.ticks) {
    REQUIRE(t.plan_id >= 0);
    REQUIRE(t.plan_id < static_cast<int>(log.plans.size()));
    CHECK(log.plans[t.plan_id].valid_from <= t.t + 1e-12);
    if (t.plan_id + 1 < static_cast<int>(log.plans.size()))
      CHECK(log.plans[t.plan_id + 1].valid_from > t.t - 1e-12);
  }
}

TEST_CASE("metrics recompute the stored summary") {
  const RunLog& log = exact_run();
  const Summary s = metrics(two_obstacle(), log);
  CHECK(summary_json(s) == summary_json(log.summary));
}

TEST_CASE("runs are deterministic and pipelining does not change them") {
  Scenario sc = two_obstacle();
  sc.time_limit = 4.0;
  const RunLog a = run_closed_loop(sc, test::ingredients());
  const RunLog b = run_closed_loop(sc, test::ingredients());
  CHECK(log_fingerprint_text(a) == log_fingerprint_text(b));
  sc.pipelined = true;
  const RunLog c = run_closed_loop(sc, test::ingredients());
  CHECK(log_fingerprint_text(a) == log_fingerprint_text(c));
}

TEST_CASE("seeded mismatch runs repeat exactly") {
  Scenario sc = two_obstacle();
  sc.time_limit = 3.0;
  sc.plant.mode = PlantMode::mismatch;
  sc.plant.seed = 3;
  const RunLog a = run_closed_loop(sc, test::ingredients());
  const RunLog b = run_closed_loop(sc, test::ingredients());
  CHECK(log_fingerprint_text(a) == log_fingerprint_text(b));
  sc.plant.seed = 4;
  const RunLog c = run_closed_loop(sc, test::ingredients());
  CHECK(log_fingerprint_text(a) != log_fingerprint_text(c));
}

TEST_CASE("planner ratio sweep keeps four free stages") {
  Schedule base;
  CHECK(sweep_schedule(base, 10).T_plan == 2.5);
  CHECK(sweep_schedule(base, 4).T_plan == 2.5);
  CHECK(sweep_schedule(base, 7).T_plan == 2.5);
  CHECK(sweep_schedule(base, 13).T_plan == doctest::Approx(3.25));
  CHECK(sweep_schedule(base, 16).T_plan == doctest::Approx(4.0));
  for (int beta : {2, 3, 4, 5, 7, 10, 13, 16, 20}) {
    const Schedule s = sweep_schedule(base, beta);
    CHECK_NOTHROW(s.validate());
    CHECK(s.n_plan() - 1 - s.n_fix() >= 3);
  }
}

TEST_CASE("scenario validation") {
  Scenario sc = two_obstacle();
  CHECK_NOTHROW(sc.validate());
  sc.start_offset = {0.6, 0.0, 0.0};
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc = two_obstacle();
  sc.goal.p = {100.0, 0.0, 1.0};
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc = two_obstacle();
  sc.start.head<2>() = sc.obstacles.at(0).center;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc = two_obstacle();
  sc.decomp.box_width = 0.0;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc = two_obstacle();
  sc.time_limit = -1.0;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
}

TEST_CASE("clearance is the rectangle distance minus the robot radius") {
  Scenario sc = two_obstacle();
  const Obstacle& o = sc.obstacles.at(0);
  const Eigen::Vector2d p = o.center + Eigen::Vector2d(0.5 * o.width + 0.5, 0.0);
  CHECK(clearance(sc, p) == doctest::Approx(0.5 - sc.decomp.robot_radius));
}
