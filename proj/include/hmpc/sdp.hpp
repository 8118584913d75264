#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace hmpc {

// Sparse symmetric coefficient: (row, col, value), both triangles listed.
struct SymEntry {
  int r, c;
  double v;
};

// F(y) = F0 + sum_i y_i F_i, constrained to F(y) >= 0.
struct LmiBlock {
  int n = 0;
  Eigen::MatrixXd F0;
  std::vector<int> vars;                       // variables entering this block
  std::vector<std::vector<SymEntry>> coeffs;   // parallel to vars

  void add(int var, int r, int c, double v);   // adds v at (r,c) and (c,r) unless r==c
  Eigen::MatrixXd eval(const Eigen::VectorXd& y) const;
};

// minimize c'y - log det F_{logdet_block}(y)  subject to every block >= 0.
struct SdpProblem {
  int m = 0;
  Eigen::VectorXd c;
  std::vector<LmiBlock> blocks;
  int logdet_block = -1;
};

struct SdpSettings {
  double rel_gap = 1e-7;  // duality gap target relative to |objective|
  int max_iter = 400;
  bool verbose = false;
};

struct SdpResult {
  Eigen::VectorXd y;
  double objective = 0.0;
  double gap_bound = 0.0;
  double min_eig = 0.0;         // smallest eigenvalue over all blocks at y
  int iterations = 0;
  bool feasible = false;
  bool converged = false;
  std::string message;
};

SdpResult solve_sdp(const SdpProblem& prob, const Eigen::VectorXd& y0, const SdpSettings& s = {});

double min_block_eig(const SdpProblem& prob, const Eigen::VectorXd& y);

}  // namespace hmpc
