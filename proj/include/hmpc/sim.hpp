#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hmpc/controllers.hpp"
#include "hmpc/decomp.hpp"
#include "hmpc/gridmap.hpp"
#include "hmpc/model.hpp"
#include "hmpc/ocp.hpp"
#include "hmpc/terminal.hpp"

namespace hmpc {

enum class ControllerKind { hmpc, smpc };
enum class PlantMode { exact, mismatch };
const char* to_string(ControllerKind k);
const char* to_string(PlantMode m);

struct PlantConfig {
  PlantMode mode = PlantMode::exact;
  double param_spread = 0.1;  // relative, drawn per parameter in [1 - s, 1 + s] for tau and k
  double thrust_bias = 0.1;   // m/s^2 added to the vertical acceleration
  double disturbance = 0.2;   // m/s^2 bound per axis, redrawn every tick
  int substeps = 10;          // RK4 substeps per tick in mismatch mode
  std::uint64_t seed = 1;
};

struct Scenario {
  std::string name = "unnamed";
  MapSpec map;
  std::vector<Obstacle> obstacles;
  Eigen::Vector3d start{0.0, 0.0, 1.0};
  double start_yaw = 0.0;
  // Initial plant position minus the bootstrap plan position.
  Eigen::Vector3d start_offset = Eigen::Vector3d::Zero();
  Goal goal{Eigen::Vector3d(0.0, 0.0, 1.0), 0.0};
  double goal_radius = 0.05;
  double time_limit = 40.0;

  ControllerKind controller = ControllerKind::hmpc;
  PlantConfig plant;
  ModelParams model;
  SystemBounds bounds;
  Schedule schedule;
  DecompParams decomp;
  GoCostConfig pmpc_cost;
  TmpcConfig tmpc;
  SmpcConfig smpc;
  OcpSettings solver;
  bool pipelined = false;
  bool region_oracle = true;  // exhaustive occupied-cell check for every region

  void validate() const;
};

struct TickRecord {
  long tick = 0;
  double t = 0.0;
  Vec x;                 // plant state at t
  Vec u;                 // base input applied over [t, t + Ts]
  Eigen::Vector3d p_ref = Eigen::Vector3d::Zero();
  int plan_id = -1;      // plan the reference sample came from (-1 for smpc)
  int region = -1;       // interval of that plan active at t
  double tracking_error = 0.0;
  double clearance = 0.0;
  // Solve producing the input for the next tick.
  SolveStatus status = SolveStatus::solved;
  int iterations = 0;
  double objective = 0.0;
  double kkt = 0.0;
  double candidate_violation = 0.0;  // shifted candidate of the previous solve, 0 on the first tick
  double max_slack = 0.0;
  bool fallback = false;
};

struct CycleRecord {
  int plan_id = 0;       // plan produced by this cycle
  double launched = 0.0;
  double valid_from = 0.0;
  SolveStatus status = SolveStatus::solved;
  int iterations = 0;
  double objective = 0.0;
  double candidate_violation = 0.0;
  double shift_violation = 0.0;  // worst previous-plan sample against the new tightened regions
  double plan_violation = 0.0;
  double region_margin = 0.0;    // min over occupied cells of (distance outside region) - r/2
  bool assumption1 = true;
  bool used_candidate = false;
  std::vector<double> region_areas;
};

struct Summary {
  std::string scenario;
  std::string controller;
  std::string plant;
  int beta = 0;
  double box_width = 0.0;
  std::uint64_t seed = 0;
  bool goal_reached = false;
  double goal_time = -1.0;
  double final_time = 0.0;
  long ticks = 0;
  int cycles = 0;
  double min_clearance = 0.0;
  double max_tracking_error = 0.0;  // from the first planner validity boundary on
  double z_min = 0.0, z_max = 0.0;
  double max_slack = 0.0;
  int fast_failures = 0;   // tmpc / smpc non-success
  int plan_failures = 0;
  int fallbacks = 0;
  double max_tmpc_candidate_violation = 0.0;
  double max_pmpc_candidate_violation = 0.0;
  double max_shift_violation = -1e300;
  double max_plan_violation = -1e300;
  double min_region_margin = 1e300;
  int assumption1_failures = 0;
  int descent_violations = 0;
  double mean_fast_iterations = 0.0;
  double mean_plan_iterations = 0.0;
  std::string error;       // hard failure message, empty when none
  bool invariants_ok = false;
};

struct Timing {
  std::vector<double> fast_ms;
  std::vector<double> plan_ms;
};

struct RunLog {
  static constexpr int kSchemaVersion = 1;
  std::vector<TickRecord> ticks;
  std::vector<CycleRecord> cycles;
  std::vector<Plan> plans;  // bootstrap plan first
  Summary summary;
  Timing timing;            // wall clock, kept apart so the log stays reproducible
};

// Plant integrator for one tick. Exact mode uses the controllers' discrete model.
class Plant {
 public:
  explicit Plant(const Scenario& sc);
  Vec step(const Vec& x, const Vec& u, double dt);
  const ModelParams& params() const { return mp_; }
  Eigen::Vector3d last_disturbance() const { return dist_; }

 private:
  PlantConfig cfg_;
  ModelParams mp_;
  BaseModel exact_;
  std::mt19937_64 rng_;
  Eigen::Vector3d dist_ = Eigen::Vector3d::Zero();
  double uniform();
};

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Schedule for a planner ratio sweep: the horizon grows to keep at least four free
// planner stages after the pinned ones.
Schedule sweep_schedule(const Schedule& base, int beta);

GridMap build_map(const Scenario& sc);
Plan bootstrap(const Scenario& sc, const TerminalIngredients& ti, const GridMap& map);
RunLog run_closed_loop(const Scenario& sc, const TerminalIngredients& ti);
// Recomputes the aggregate fields from the records.
Summary metrics(const Scenario& sc, const RunLog& log);

// Clearance of p to the obstacle rectangles minus the robot radius.
double clearance(const Scenario& sc, const Eigen::Vector2d& p);
// Min over the cells of (worst region half-space value) - r/2. Non-negative means
// no cell lies within r/2 of the region.
double region_cell_margin(const PointCloud& cells, const ConvexRegion& r, double robot_radius);

}  // namespace hmpc
