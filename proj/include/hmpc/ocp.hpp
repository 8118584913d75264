#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hmpc/model.hpp"
#include "hmpc/qp.hpp"

namespace hmpc {

// Cx x + Cu u <= d on one node. Cu may be empty for state-only rows.
struct LinRows {
  Mat Cx;
  Mat Cu;
  Vec d;
  bool soft = false;
  int rows() const { return static_cast<int>(d.size()); }
};

// Second-order model of a cost term: value + g'd + 1/2 d'Hd.
struct StageCost {
  double value = 0.0;
  Vec gx, gu;
  Mat Hxx, Hxu, Huu;
};
struct TerminalCost {
  double value = 0.0;
  Vec gx;
  Mat Hxx;
};

// Rows applied to the state reached after `sub` substeps of stage `stage`
// (sub = 0 is the stage node itself) together with that stage's input.
struct PathRows {
  int stage = 0;
  int sub = 0;
  LinRows rows;
};

struct TerminalQuad {
  Mat P;
  Vec center;
  double level = 0.0;  // (x - center)' P (x - center) <= level
};

struct OcpSpec {
  const DiscreteModel* model = nullptr;
  int N = 0;
  double dt = 0.0;
  int substeps = 1;
  Vec x0;
  Vec u_default;  // input used when no warm start is given

  std::function<void(int k, const Vec& x, const Vec& u, StageCost& c)> stage_cost;
  std::function<void(const Vec& x, TerminalCost& c)> terminal_cost;

  std::vector<PathRows> path;
  std::vector<LinRows> terminal_rows;  // state-only rows on x_N
  Mat term_eq_A;                       // term_eq_A x_N = term_eq_b
  Vec term_eq_b;
  std::optional<TerminalQuad> terminal_quad;

  // One slack per stage plus one for the terminal node, shared by that node's soft rows.
  double slack_quad = 1e4;
  double slack_lin = 1e3;

  bool has_soft() const;
  void validate() const;
};

struct OcpSettings {
  int max_iter = 50;
  double kkt_tol = 1e-4;
  double decrease_tol = 1e-9;  // relative predicted decrease counted as converged
  double eq_tol = 1e-8;
  double ineq_tol = 1e-8;
  double qp_tol = 1e-9;
  int max_halvings = 10;
  double terminal_margin = 1e-8;
  bool verbose = false;  // per-iteration trace on stderr
};

enum class SolveStatus { solved, max_iter, infeasible_qp, nan };
const char* to_string(SolveStatus s);

struct OcpSolution {
  std::vector<Vec> x;                 // N+1 stage states
  std::vector<Vec> u;                 // N stage inputs
  Vec slack;                          // N+1 or empty
  std::vector<std::vector<Vec>> sub;  // sub[k][j]: state after j substeps of stage k
  double objective = 0.0;
  double kkt = 0.0;
  double defect = 0.0;                // max |x_{k+1} - F(x_k, u_k)|
  double violation = 0.0;             // worst inequality / equality violation
  double step_norm = 0.0;             // last QP step, inf-norm
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
};

OcpSolution solve_ocp(const OcpSpec& spec, const OcpSolution* warm, const OcpSettings& cfg = {});

// Stationarity plus feasibility at a candidate: ||H p||_inf of the local QP step
// plus the worst defect / constraint violation.
double kkt_residual(const OcpSpec& spec, const OcpSolution& candidate, const OcpSettings& cfg = {});

// Fills sub, objective, defect and violation for the trajectory in `sol`.
void evaluate_candidate(const OcpSpec& spec, OcpSolution& sol);

// Drop `shift` stages and append new ones: tail(k, x_k) gives the input of new
// stage k, and states are rolled out with the model.
using TailInput = std::function<Vec(int k, const Vec& x)>;
OcpSolution shift_warm_start(const OcpSolution& prev, int shift, const TailInput& tail,
                             const DiscreteModel& model, double dt, int substeps);

// Quadratic cost ||r||^2_W with r = Jx dx + Ju du + r0 folded into a StageCost.
void add_weighted_ls(StageCost& c, const Vec& r, const Mat& Jx, const Mat& Ju, const Vec& w);

}  // namespace hmpc
