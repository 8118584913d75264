#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "hmpc/decomp.hpp"
#include "hmpc/model.hpp"
#include "hmpc/ocp.hpp"
#include "hmpc/terminal.hpp"

namespace hmpc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Schedule {
  double Ts_track = 0.05;  // tracker sampling time
  int beta = 10;           // planner / tracker sampling ratio
  double T_track = 0.5;    // tracker horizon
  double T_plan = 2.5;     // planner horizon (rounded to whole planner periods)

  double Ts_plan() const { return beta * Ts_track; }
  int n_track() const;     // tracker stages
  int n_fix() const;       // planner stages pinned to the previous plan
  int n_plan() const;      // planner stages
  void validate() const;
};

enum class ThrustReg { hover_centered, as_written };

struct GoWeights {
  double xy = 40.0, z = 40.0, yaw = 40.0;
};

struct GoCostConfig {
  GoWeights stage{40.0, 40.0, 40.0};
  GoWeights terminal{200.0, 200.0, 200.0};
  double w_a = 40.0;
  double w_cmd_rp = 16.0;   // roll / pitch command memory
  double w_cmd_yaw = 16.0;  // yaw command memory
  Vec U = Vec::Constant(4, 16.0);
  double huber_delta = 1.0;
  ThrustReg thrust_reg = ThrustReg::hover_centered;
};

struct TmpcConfig {
  Vec Q = (Vec(10) << 2e3, 2e3, 2e3, 20, 20, 20, 100, 100, 100, 100).finished();
  Vec R = (Vec(4) << 2e3, 2e3, 2e3, 100).finished();
};

struct SmpcConfig {
  double Ts = 0.05;
  double T = 0.4;
  GoCostConfig cost{{200.0, 200.0, 200.0}, {2e3, 2e3, 2e3}, 200.0, 160.0, 160.0,
                    Vec::Constant(4, 160.0), 1.0, ThrustReg::hover_centered};
  double slack_quad = 1e4;
  double slack_lin = 1e3;
  double safety = 0.1;
  int n_stages() const;
};

struct Goal {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

double huber(double d, double delta);

// Goal-oriented cost on an extended state (and input, unless terminal). Not
// multiplied by the stage duration.
void go_cost(const Vec& x, const Vec* u, const Goal& goal, const GoCostConfig& c, bool terminal,
             const ModelParams& mp, StageCost& out);

// Planner output: extended-model trajectory with every tracker-rate substep.
struct Plan {
  int id = 0;
  double valid_from = 0.0;
  double Ts_plan = 0.5;
  int beta = 10;
  std::vector<Vec> x;                 // N+1 stage states (extended)
  std::vector<Vec> u;                 // N stage inputs (extended)
  std::vector<std::vector<Vec>> sub;  // sub[k][j], j < beta
  Vec u_steady;                       // input holding the terminal steady state
  std::vector<ConvexRegion> regions;  // one per interval
  int N() const { return static_cast<int>(u.size()); }
  // Extended state n tracker ticks after valid_from (held at x_N afterwards).
  Vec state_at_tick(long n) const;
  Vec input_at_tick(long n) const;
};

struct ReferenceTrajectory {
  double start = 0.0;
  double Ts = 0.05;
  std::vector<Vec> x;  // base states, n+1
  std::vector<Vec> u;  // base inputs, n (plus one at the terminal node for the terminal law)
};

// n+1 reference samples starting at absolute time `start` (a tick of the plan).
ReferenceTrajectory subsample_reference(const Plan& plan, double start, int n, double Ts);

// Interval containing the relative time tau, right-closed; tau = 0 maps to 0.
int region_index(double tau, double Ts_plan, int N);
const ConvexRegion& region_for_stage(double t_abs, const Plan& plan);

// Tightened system rows: l_j - c_s[j] alpha. Throws ConfigError if an interval empties.
std::vector<ZRow> tightened_rows(const PolytopeZ& Z, const TerminalIngredients& ti);

class Tmpc {
 public:
  Tmpc(ModelParams mp, SystemBounds b, TmpcConfig cfg, TerminalIngredients ti, Schedule s);
  OcpSpec build(const Vec& x0, const ReferenceTrajectory& ref, const Plan& plan) const;
  // Previous inputs shifted by one tick, rolled out from x0, with the terminal law appended.
  OcpSolution candidate(const OcpSolution& prev, const Vec& x0, const ReferenceTrajectory& ref) const;
  OcpSolution from_reference(const ReferenceTrajectory& ref) const;
  Vec terminal_law(const Vec& x, const Vec& xr, const Vec& ur) const;
  const BaseModel& model() const { return model_; }
  const TerminalIngredients& ingredients() const { return ti_; }
  const Schedule& schedule() const { return sched_; }

 private:
  BaseModel model_;
  SystemBounds bounds_;
  PolytopeZ Z_;
  TmpcConfig cfg_;
  TerminalIngredients ti_;
  Schedule sched_;
};

class Pmpc {
 public:
  Pmpc(ModelParams mp, SystemBounds b, GoCostConfig cost, TerminalIngredients ti, Schedule s, Goal goal,
       DecompParams dp);
  Plan bootstrap(const Vec& start_ext, const GridMap& map) const;
  // Regions for the plan following `prev`.
  std::vector<ConvexRegion> regions_for_next(const Plan& prev, const GridMap& map) const;
  OcpSpec build(const Plan& prev, const std::vector<ConvexRegion>& regions) const;
  OcpSolution candidate(const Plan& prev) const;
  Plan assemble(const Plan& prev, const OcpSolution& sol, std::vector<ConvexRegion> regions) const;
  // Max violation of prev's samples over [Ts_plan, T_plan] in the tightened new regions.
  double shift_violation(const Plan& prev, const std::vector<ConvexRegion>& regions) const;
  // Max violation of the plan's own stored trajectory (system rows, regions, terminal equalities).
  double plan_violation(const Plan& plan) const;
  std::vector<std::vector<Eigen::Vector2d>> interval_samples(const Plan& plan) const;
  const ExtendedModel& model() const { return model_; }
  const Schedule& schedule() const { return sched_; }
  Vec steady_input() const;
  double obstacle_tightening() const { return dp_.tighten; }

 private:
  ExtendedModel model_;
  SystemBounds bounds_;
  std::vector<ZRow> zbar_;
  GoCostConfig cost_;
  TerminalIngredients ti_;
  Schedule sched_;
  Goal goal_;
  DecompParams dp_;
};

class Smpc {
 public:
  Smpc(ModelParams mp, SystemBounds b, SmpcConfig cfg, Goal goal, DecompParams dp);
  // Regions for the next solve from the previous solution's positions (or the start).
  std::vector<ConvexRegion> regions_for_next(const OcpSolution* prev, const Vec& x0,
                                             const GridMap& map,
                                             const std::vector<ConvexRegion>* fallback) const;
  OcpSpec build(const Vec& x0, const std::vector<ConvexRegion>& regions) const;
  OcpSolution warm(const OcpSolution* prev, const Vec& x0) const;
  const ExtendedModel& model() const { return model_; }
  const SmpcConfig& config() const { return cfg_; }

 private:
  ExtendedModel model_;
  SystemBounds bounds_;
  PolytopeZ Z_;
  SmpcConfig cfg_;
  Goal goal_;
  DecompParams dp_;
};

// Rows of a ZRow list expressed on the extended model: [x_base; memory] and a_cmd.
LinRows ext_rows(const std::vector<ZRow>& rows, bool state_only);
LinRows base_rows(const std::vector<ZRow>& rows, bool state_only);
LinRows region_rows(const std::vector<HalfSpace>& hs, int nx, double shrink);
LinRows rate_rows(double rate_max);
LinRows stack(const std::vector<LinRows>& parts, int nx, int nu);

Vec hover_ext_state(const Eigen::Vector3d& p, double yaw, const ModelParams& mp);
Vec steady_ext_input(const ModelParams& mp);

}  // namespace hmpc
