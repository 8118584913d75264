#include "hmpc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <optional>

namespace hmpc {

using Eigen::Vector2d;
using Eigen::Vector3d;

const char* to_string(ControllerKind k) { return k == ControllerKind::hmpc ? "hmpc" : "smpc"; }
const char* to_string(PlantMode m) { return m == PlantMode::exact ? "exact" : "mismatch"; }

void Scenario::validate() const {
  model.validate();
  schedule.validate();
  if (!(goal_radius > 0.0)) throw ConfigError("goal radius must be positive");
  if (!(time_limit > 0.0)) throw ConfigError("time limit must be positive");
  if (!(decomp.box_width > 0.0) || !(decomp.robot_radius > 0.0))
    throw ConfigError("box width and robot radius must be positive");
  if (plant.substeps < 1) throw ConfigError("plant substeps must be >= 1");
  auto inside = [&](const Vector2d& p) {
    return p.x() > map.origin.x() && p.y() > map.origin.y() && p.x() < map.origin.x() + map.width &&
           p.y() < map.origin.y() + map.height;
  };
  if (!inside(start.head<2>())) throw ConfigError("start outside the map");
  if (!start_offset.allFinite() || start_offset.norm() > 0.5) throw ConfigError("start offset must be below 0.5 m");
  if (!inside(goal.p.head<2>())) throw ConfigError("goal outside the map");
  for (const auto& o : obstacles)
    if (rect_distance(start.head<2>(), o) < decomp.robot_radius)
      throw ConfigError("start within one robot radius of an obstacle");
}

// ---------------------------------------------------------------- plant

Plant::Plant(const Scenario& sc) : cfg_(sc.plant), mp_(sc.model), exact_(sc.model), rng_(sc.plant.seed) {
  if (cfg_.mode == PlantMode::mismatch) {
    auto perturb = [&](double& v) { v *= 1.0 + cfg_.param_spread * (2.0 * uniform() - 1.0); };
    perturb(mp_.tau_phi);
    perturb(mp_.tau_theta);
    perturb(mp_.tau_psi);
    perturb(mp_.tau_a);
    perturb(mp_.k_phi);
    perturb(mp_.k_theta);
    perturb(mp_.k_psi);
    perturb(mp_.k_a);
  }
}

double Plant::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

Vec Plant::step(const Vec& x, const Vec& u, double dt) {
  Vec out;
  if (cfg_.mode == PlantMode::exact) {
    exact_.step(x, u, dt, out, nullptr, nullptr);
  } else {
    for (int i = 0; i < 3; ++i) dist_(i) = cfg_.disturbance * (2.0 * uniform() - 1.0);
    Vector3d push = dist_;
    push.z() += cfg_.thrust_bias;
    const ModelParams mp = mp_;
    out = rk4_step(
        [mp, push](const Vec& xs, const Vec& us) {
          Vec f = eval_dynamics(xs, us, mp);
          f.segment<3>(ix::vx) += push;
          return f;
        },
        x, u, dt, cfg_.substeps);
  }
  if (!out.allFinite()) throw NumericError("plant state is not finite");
  return out;
}

// ---------------------------------------------------------------- helpers

Schedule sweep_schedule(const Schedule& base, int beta) {
  Schedule s = base;
  s.beta = beta;
  s.T_plan = std::max(base.T_plan, (s.n_fix() + 4) * s.Ts_plan());
  return s;
}

GridMap build_map(const Scenario& sc) { return rasterize(sc.map, sc.obstacles, sc.decomp.robot_radius); }

double clearance(const Scenario& sc, const Vector2d& p) {
  double d = 1e300;
  for (const auto& o : sc.obstacles) d = std::min(d, rect_distance(p, o));
  return d - sc.decomp.robot_radius;
}

double region_cell_margin(const PointCloud& cells, const ConvexRegion& r, double robot_radius) {
  double worst = 1e300;
  for (std::size_t i = 0; i < cells.size(); ++i)
    worst = std::min(worst, r.violation({cells.x[i], cells.y[i]}, false));
  return worst - 0.5 * robot_radius;
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Vec start_ext_state(const Scenario& sc) { return hover_ext_state(sc.start, sc.start_yaw, sc.model); }

struct CycleResult {
  Plan plan;
  CycleRecord rec;
  double ms = 0.0;
  std::string error;
};

// One planner cycle: regions from the previous plan, the shift and candidate
// checks, the solve, and the new plan. Pure in its inputs so it may run on
// another thread.
CycleResult plan_cycle(const Pmpc& pmpc, const Plan& prev, const GridMap& map, const PointCloud* cells,
                       const OcpSettings& cfg, double launched, double robot_radius) {
  const auto t0 = std::chrono::steady_clock::now();
  CycleResult out;
  CycleRecord& rec = out.rec;
  rec.plan_id = prev.id + 1;
  rec.launched = launched;
  rec.valid_from = prev.valid_from + pmpc.schedule().Ts_plan();
  std::vector<ConvexRegion> regions;
  try {
    regions = pmpc.regions_for_next(prev, map);
  } catch (const std::exception& e) {
    out.error = std::string("planner regions: ") + e.what();
    out.ms = ms_since(t0);
    return out;
  }
  rec.shift_violation = pmpc.shift_violation(prev, regions);
  const OcpSpec spec = pmpc.build(prev, regions);
  OcpSolution cand = pmpc.candidate(prev);
  evaluate_candidate(spec, cand);
  rec.candidate_violation = std::max(cand.violation, cand.defect);
  OcpSolution sol = solve_ocp(spec, &cand, cfg);
  rec.status = sol.status;
  rec.iterations = sol.iterations;
  if (sol.status != SolveStatus::solved) {
    // The candidate is feasible by construction, so keep flying it.
    sol = cand;
    rec.used_candidate = true;
  }
  rec.objective = sol.objective;
  out.plan = pmpc.assemble(prev, sol, std::move(regions));
  rec.plan_violation = pmpc.plan_violation(out.plan);
  rec.assumption1 = check_assumption1(out.plan.regions, pmpc.interval_samples(out.plan)).pass;
  rec.region_margin = 1e300;
  for (const auto& r : out.plan.regions) {
    rec.region_areas.push_back(region_area(r));
    if (cells) rec.region_margin = std::min(rec.region_margin, region_cell_margin(*cells, r, robot_radius));
  }
  out.ms = ms_since(t0);
  return out;
}

// Plan with the latest validity start not after t.
const Plan& plan_at(const std::vector<Plan>& plans, double t) {
  for (auto it = plans.rbegin(); it != plans.rend(); ++it)
    if (it->valid_from <= t + 1e-9) return *it;
  throw std::logic_error("no plan valid at the requested time");
}

class Clock {
 public:
  explicit Clock(double Ts) : Ts_(Ts) {}
  double at(long n) const { return static_cast<double>(n) * Ts_; }

 private:
  double Ts_;
};

// A run that reaches the ground is over; the plant model has no contact.
void check_ground(const Vec& x, double t) {
  if (x(ix::pz) <= 0.0) throw SimError("plant reached the ground at t=" + std::to_string(t));
}

void run_hmpc(const Scenario& sc, const TerminalIngredients& ti, RunLog& log) {
  const Schedule& sch = sc.schedule;
  const GridMap map = build_map(sc);
  std::optional<PointCloud> cells;
  if (sc.region_oracle) cells = all_cells(map);
  const PointCloud* cells_ptr = cells ? &*cells : nullptr;

  Tmpc tmpc(sc.model, sc.bounds, sc.tmpc, ti, sch);
  Pmpc pmpc(sc.model, sc.bounds, sc.pmpc_cost, ti, sch, sc.goal, sc.decomp);
  Plant plant(sc);
  const Clock clock(sch.Ts_track);
  const double Ts = sch.Ts_track;
  const int beta = sch.beta;
  const int Nt = sch.n_track();
  const bool exact = sc.plant.mode == PlantMode::exact;

  log.plans.push_back(pmpc.bootstrap(start_ext_state(sc), map));
  {
    CycleRecord boot;
    boot.plan_id = 0;
    boot.launched = 0.0;
    boot.valid_from = 0.0;
    boot.plan_violation = pmpc.plan_violation(log.plans[0]);
    boot.region_margin = 1e300;
    for (const auto& r : log.plans[0].regions) {
      boot.region_areas.push_back(region_area(r));
      if (cells_ptr)
        boot.region_margin = std::min(boot.region_margin, region_cell_margin(*cells_ptr, r, sc.decomp.robot_radius));
    }
    boot.shift_violation = -1e300;
    log.cycles.push_back(boot);
  }

  // The cycle for plan k+1 starts one tick before plan k becomes valid. Plan 1
  // therefore starts before the first tick.
  std::future<CycleResult> running;
  std::optional<CycleResult> ready;
  auto launch = [&](const Plan& prev, double t) {
    if (sc.pipelined) {
      running = std::async(std::launch::async, plan_cycle, std::cref(pmpc), prev, std::cref(map), cells_ptr,
                           sc.solver, t, sc.decomp.robot_radius);
    } else {
      ready = plan_cycle(pmpc, prev, map, cells_ptr, sc.solver, t, sc.decomp.robot_radius);
    }
  };
  auto collect = [&]() -> CycleResult {
    if (sc.pipelined) return running.get();
    CycleResult r = std::move(*ready);
    ready.reset();
    return r;
  };
  launch(log.plans[0], -Ts);
  bool cycle_pending = true;

  Vec x = log.plans[0].x[0].head(kNx);
  x.head<3>() += sc.start_offset;
  Vec u_cmd = base_input_of(log.plans[0].x[0], log.plans[0].u_steady);
  std::optional<OcpSolution> prev_sol;
  const long max_ticks = std::lround(sc.time_limit / Ts);

  for (long n = 0;; ++n) {
    const double t = clock.at(n);
    TickRecord rec;
    rec.tick = n;
    rec.t = t;
    rec.x = x;
    rec.u = u_cmd;
    {
      const Plan& active = plan_at(log.plans, t);
      const long k = std::lround((t - active.valid_from) / Ts);
      rec.p_ref = active.state_at_tick(k).head<3>();
      rec.plan_id = active.id;
      rec.region = region_index(t - active.valid_from, active.Ts_plan, active.N());
      rec.tracking_error = (x.head<3>() - rec.p_ref).norm();
    }
    rec.clearance = clearance(sc, x.head<2>());
    const bool at_goal = (x.head<2>() - sc.goal.p.head<2>()).norm() <= sc.goal_radius;
    if (at_goal || n >= max_ticks) {
      log.ticks.push_back(rec);
      break;
    }

    // Input for the next tick, computed from the state predicted under the committed input.
    Vec x_pred;
    tmpc.model().step(x, u_cmd, Ts, x_pred, nullptr, nullptr);
    const double t1 = clock.at(n + 1);
    if ((n + 1) % beta == 0 && cycle_pending) {
      CycleResult res = collect();
      cycle_pending = false;
      log.timing.plan_ms.push_back(res.ms);
      if (!res.error.empty()) {
        log.ticks.push_back(rec);
        throw SimError(res.error);
      }
      if (exact && res.rec.status != SolveStatus::solved) {
        log.cycles.push_back(res.rec);
        log.ticks.push_back(rec);
        throw SimError(std::string("planner solve failed: ") + to_string(res.rec.status));
      }
      log.cycles.push_back(res.rec);
      log.plans.push_back(std::move(res.plan));
      launch(log.plans.back(), t);
      cycle_pending = true;
    }
    const Plan& plan = plan_at(log.plans, t1);
    const ReferenceTrajectory ref = subsample_reference(plan, t1, Nt, Ts);
    const OcpSpec spec = tmpc.build(x_pred, ref, plan);
    OcpSolution warm;
    if (prev_sol) {
      warm = tmpc.candidate(*prev_sol, x_pred, ref);
      evaluate_candidate(spec, warm);
      rec.candidate_violation = std::max(warm.violation, warm.defect);
    } else {
      warm = tmpc.from_reference(ref);
    }
    const auto t0 = std::chrono::steady_clock::now();
    OcpSolution sol = solve_ocp(spec, &warm, sc.solver);
    log.timing.fast_ms.push_back(ms_since(t0));
    rec.status = sol.status;
    rec.iterations = sol.iterations;
    rec.objective = sol.objective;
    rec.kkt = sol.kkt;
    Vec u_next;
    if (sol.status == SolveStatus::solved) {
      u_next = sol.u[0];
      prev_sol = std::move(sol);
    } else if (exact) {
      log.ticks.push_back(rec);
      throw SimError(std::string("tracker solve failed at t=") + std::to_string(t) + ": " + to_string(sol.status));
    } else {
      u_next = tmpc.terminal_law(x_pred, ref.x[0], ref.u[0]);
      rec.fallback = true;
      prev_sol.reset();
    }
    log.ticks.push_back(rec);
    x = plant.step(x, u_cmd, Ts);
    check_ground(x, clock.at(n + 1));
    u_cmd = u_next;
  }
  if (cycle_pending && sc.pipelined) running.wait();
}

void run_smpc(const Scenario& sc, RunLog& log) {
  const double Ts = sc.smpc.Ts;
  if (std::abs(Ts - sc.schedule.Ts_track) > 1e-12)
    throw ConfigError("single-layer sampling time must equal the tracker sampling time");
  const GridMap map = build_map(sc);
  Smpc smpc(sc.model, sc.bounds, sc.smpc, sc.goal, sc.decomp);
  Plant plant(sc);
  const Clock clock(Ts);

  Vec xe = start_ext_state(sc);
  xe.head<3>() += sc.start_offset;
  Vec ue_cmd = steady_ext_input(sc.model);
  std::optional<OcpSolution> prev_sol;
  std::vector<ConvexRegion> regions;
  const long max_ticks = std::lround(sc.time_limit / Ts);

  for (long n = 0;; ++n) {
    const double t = clock.at(n);
    TickRecord rec;
    rec.tick = n;
    rec.t = t;
    rec.x = xe.head(kNx);
    rec.u = base_input_of(xe, ue_cmd);
    rec.p_ref = xe.head<3>();
    rec.clearance = clearance(sc, xe.head<2>());
    const bool at_goal = (xe.head<2>() - sc.goal.p.head<2>()).norm() <= sc.goal_radius;
    if (at_goal || n >= max_ticks) {
      log.ticks.push_back(rec);
      break;
    }

    Vec xe_pred;
    smpc.model().step(xe, ue_cmd, Ts, xe_pred, nullptr, nullptr);
    regions = smpc.regions_for_next(prev_sol ? &*prev_sol : nullptr, xe_pred, map,
                                    regions.empty() ? nullptr : &regions);
    const OcpSpec spec = smpc.build(xe_pred, regions);
    OcpSolution warm = smpc.warm(prev_sol ? &*prev_sol : nullptr, xe_pred);
    const auto t0 = std::chrono::steady_clock::now();
    OcpSolution sol = solve_ocp(spec, &warm, sc.solver);
    log.timing.fast_ms.push_back(ms_since(t0));
    rec.status = sol.status;
    rec.iterations = sol.iterations;
    rec.objective = sol.objective;
    rec.kkt = sol.kkt;
    Vec ue_next;
    if (sol.status == SolveStatus::solved) {
      rec.max_slack = sol.slack.size() ? std::max(0.0, sol.slack.maxCoeff()) : 0.0;
      ue_next = sol.u[0];
      prev_sol = std::move(sol);
    } else {
      // Keep flying the shifted previous solution.
      ue_next = warm.u[0];
      rec.fallback = true;
    }
    log.ticks.push_back(rec);
    const Vec x_next = plant.step(xe.head(kNx), base_input_of(xe, ue_cmd), Ts);
    xe.head(kNx) = x_next;
    check_ground(x_next, clock.at(n + 1));
    xe.tail<3>() += Ts * ue_cmd.head<3>();
    ue_cmd = ue_next;
  }
}

}  // namespace

Plan bootstrap(const Scenario& sc, const TerminalIngredients& ti, const GridMap& map) {
  Pmpc pmpc(sc.model, sc.bounds, sc.pmpc_cost, ti, sc.schedule, sc.goal, sc.decomp);
  return pmpc.bootstrap(start_ext_state(sc), map);
}

RunLog run_closed_loop(const Scenario& sc, const TerminalIngredients& ti) {
  sc.validate();
  RunLog log;
  std::string error;
  try {
    if (sc.controller == ControllerKind::hmpc) run_hmpc(sc, ti, log);
    else run_smpc(sc, log);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    error = e.what();
  }
  log.summary = metrics(sc, log);
  log.summary.error = error;
  if (!error.empty()) log.summary.invariants_ok = false;
  return log;
}

Summary metrics(const Scenario& sc, const RunLog& log) {
  Summary s;
  s.scenario = sc.name;
  s.controller = to_string(sc.controller);
  s.plant = to_string(sc.plant.mode);
  s.beta = sc.schedule.beta;
  s.box_width = sc.decomp.box_width;
  s.seed = sc.plant.seed;
  s.ticks = static_cast<long>(log.ticks.size());
  s.cycles = std::max(0, static_cast<int>(log.cycles.size()) - 1);
  s.min_clearance = 1e300;
  s.z_min = 1e300;
  s.z_max = -1e300;
  const bool hmpc = sc.controller == ControllerKind::hmpc;
  const double first_boundary = sc.schedule.Ts_plan();
  double prev_obj = 0.0;
  bool have_prev = false;
  long fast_solves = 0, fast_iters = 0;
  for (std::size_t i = 0; i < log.ticks.size(); ++i) {
    const TickRecord& r = log.ticks[i];
    s.min_clearance = std::min(s.min_clearance, r.clearance);
    s.z_min = std::min(s.z_min, r.x(ix::pz));
    s.z_max = std::max(s.z_max, r.x(ix::pz));
    if (hmpc && r.t >= first_boundary - 1e-9) s.max_tracking_error = std::max(s.max_tracking_error, r.tracking_error);
    s.final_time = r.t;
    if ((r.x.head<2>() - sc.goal.p.head<2>()).norm() <= sc.goal_radius && !s.goal_reached) {
      s.goal_reached = true;
      s.goal_time = r.t;
    }
    // The last record closes the run and carries no solve.
    if (i + 1 == log.ticks.size() && (s.goal_reached || s.final_time >= sc.time_limit - 1e-9)) continue;
    s.max_slack = std::max(s.max_slack, r.max_slack);
    ++fast_solves;
    fast_iters += r.iterations;
    if (r.status != SolveStatus::solved) ++s.fast_failures;
    if (r.fallback) ++s.fallbacks;
    s.max_tmpc_candidate_violation = std::max(s.max_tmpc_candidate_violation, r.candidate_violation);
    if (hmpc && r.status == SolveStatus::solved) {
      if (have_prev && r.tracking_error > 1e-6 && r.objective > prev_obj + 1e-6) ++s.descent_violations;
      prev_obj = r.objective;
      have_prev = true;
    } else {
      have_prev = false;
    }
  }
  if (fast_solves) s.mean_fast_iterations = static_cast<double>(fast_iters) / fast_solves;
  long plan_iters = 0;
  for (std::size_t i = 0; i < log.cycles.size(); ++i) {
    const CycleRecord& c = log.cycles[i];
    s.min_region_margin = std::min(s.min_region_margin, c.region_margin);
    s.max_plan_violation = std::max(s.max_plan_violation, c.plan_violation);
    if (i == 0) continue;  // bootstrap
    plan_iters += c.iterations;
    if (c.status != SolveStatus::solved) ++s.plan_failures;
    if (!c.assumption1) ++s.assumption1_failures;
    s.max_pmpc_candidate_violation = std::max(s.max_pmpc_candidate_violation, c.candidate_violation);
    s.max_shift_violation = std::max(s.max_shift_violation, c.shift_violation);
  }
  if (s.cycles) s.mean_plan_iterations = static_cast<double>(plan_iters) / s.cycles;

  const double tol = 1e-6;
  if (hmpc) {
    bool ok = s.min_clearance >= 0.0 && s.min_region_margin >= -1e-9 && s.max_shift_violation <= tol &&
              s.max_pmpc_candidate_violation <= tol && s.max_plan_violation <= tol && s.plan_failures == 0;
    if (sc.plant.mode == PlantMode::exact)
      ok = ok && s.fast_failures == 0 && s.max_tmpc_candidate_violation <= tol && s.descent_violations == 0;
    s.invariants_ok = ok;
  } else {
    s.invariants_ok = true;
  }
  return s;
}

}  // namespace hmpc
