#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmpc/model.hpp"
#include "hmpc/sdp.hpp"

namespace hmpc {

// Gridding of the attitude box and the thrust interval. Positions, velocities and
// inputs do not enter the Jacobians and are fixed at zero / hover.
struct GridSpec {
  int att_points = 5;
  int accel_points = 2;  // points over [a_min, a_max], endpoints included
  bool operator==(const GridSpec&) const = default;
};

struct TerminalDesignSpec {
  Mat Q;
  Mat R;
  GridSpec solve_grid{5, 2};
  GridSpec check_grid{21, 2};
  double weight_scale = 1000.0;  // c_c = weight_scale / width^2
  double d = 0.1;                // obstacle margin, meters
  double check_tol = 1e-6;
  SdpSettings sdp;
};

struct TerminalIngredients {
  Mat P;                 // 10x10
  Mat K;                 // 4x10
  double alpha = 0.0;
  Vec c_s;               // one per system-constraint row
  double c_o = 0.0;
  std::uint64_t fingerprint = 0;
  // Carried for the file header and for consumers that need the design weights.
  Mat Q;
  Mat R;
  GridSpec solve_grid;
  GridSpec check_grid;
  std::string note;
};

struct DesignError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<Vec> build_grid(const SystemBounds& b, const GridSpec& spec, const ModelParams& mp);

// Variable layout of the design SDP.
struct SdpLayout {
  static constexpr int nx = kNx, nu = kNu;
  int n_s = 0;
  int x_index(int r, int c) const;       // symmetric X, upper triangle storage
  int y_index(int r, int c) const { return nx * (nx + 1) / 2 + r + nu * c; }
  int cs_index(int j) const { return nx * (nx + 1) / 2 + nu * nx + j; }
  int m() const { return cs_index(n_s); }
  Mat X(const Vec& y) const;
  Mat Y(const Vec& y) const;
};

SdpProblem assemble_lmis(const std::vector<Vec>& points, const Mat& Q, const Mat& R,
                         const PolytopeZ& Z, const ModelParams& mp, double weight_scale = 1.0);

struct SdpSolution {
  Mat X, Y;
  Vec c_s_sq;
  SdpResult raw;
};
SdpSolution solve_design_sdp(const SdpProblem& prob, const PolytopeZ& Z, const SdpSettings& s = {});

void compute_PK(const Mat& X, const Mat& Y, Mat& P, Mat& K);
void compute_tighteners(const Mat& P, const Mat& K, const PolytopeZ& Z, const Mat& C, Vec& c_s,
                        double& c_o);
double compute_alpha(double d, double c_o);

struct LmiReport {
  int points = 0;
  int failures = 0;
  double worst_eig = -1e300;
  Vec worst_point;
  // Interval width minus twice the tightening, per constraint row.
  Vec tightened_width;
  bool tightened_nonempty = true;
  bool pass = false;
};

LmiReport verify_lmis(const TerminalIngredients& ti, const Mat& Q, const Mat& R,
                      const std::vector<Vec>& points, const PolytopeZ& Z, const ModelParams& mp,
                      double tol = 1e-6);

// Full offline design: grid, SDP, P/K, tighteners, alpha, check grid.
TerminalIngredients design_terminal(const TerminalDesignSpec& spec, const ModelParams& mp,
                                    const SystemBounds& b, LmiReport* check_report = nullptr);

// True when cached ingredients were designed from the same model, bounds, weights,
// solve grid, weight scale and obstacle margin.
bool ingredients_match(const TerminalIngredients& ti, const TerminalDesignSpec& spec, const ModelParams& mp,
                       const SystemBounds& b);

std::uint64_t design_fingerprint(const ModelParams& mp, const SystemBounds& b);

void save_ingredients(const std::string& path, const TerminalIngredients& ti);
std::string ingredients_to_string(const TerminalIngredients& ti);
// Throws DesignError when the stored fingerprint differs from `expected_fp`
// (pass 0 to skip the check).
TerminalIngredients load_ingredients(const std::string& path, std::uint64_t expected_fp);
TerminalIngredients ingredients_from_string(const std::string& text, std::uint64_t expected_fp);

// Terminal feedback u_r + K (x - x_r) on base coordinates.
Vec terminal_control(const Vec& x, const Vec& xr, const Vec& ur, const TerminalIngredients& ti);

// ||x - xr||_P
double p_norm(const Vec& dx, const Mat& P);

}  // namespace hmpc
