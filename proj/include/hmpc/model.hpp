#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// State ordering: p(3) v(3) att(3: roll, pitch, yaw) a | input: att_cmd(3) a_cmd.
// The extended model appends att_cmd memory (3) to the state and takes
// attitude-command rates plus a_cmd as input.
inline constexpr int kNx = 10;
inline constexpr int kNu = 4;
inline constexpr int kNxExt = 13;
inline constexpr int kNuExt = 4;

namespace ix {
inline constexpr int px = 0, py = 1, pz = 2;
inline constexpr int vx = 3, vy = 4, vz = 5;
inline constexpr int phi = 6, theta = 7, psi = 8, a = 9;
inline constexpr int mem_phi = 10, mem_theta = 11, mem_psi = 12;
}  // namespace ix

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelParams {
  double tau_phi = 0.18;
  double tau_theta = 0.18;
  double tau_psi = 0.56;
  double tau_a = 0.050;
  double k_phi = 1.0;
  double k_theta = 1.0;
  double k_psi = 1.0;
  double k_a = 1.0;
  double g = 9.81;

  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

struct QuadState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d att = Eigen::Vector3d::Zero();
  double a = 0.0;

  Vec flat() const;
  static QuadState from(const Vec& x);
  static QuadState hover(const Eigen::Vector3d& p, double yaw, const ModelParams& mp);
};

struct QuadInput {
  Eigen::Vector3d att_cmd = Eigen::Vector3d::Zero();
  double a_cmd = 0.0;

  Vec flat() const;
  static QuadInput from(const Vec& u);
  static QuadInput hover(double yaw, const ModelParams& mp);
};

Vec eval_dynamics(const Vec& x, const Vec& u, const ModelParams& mp);
Vec eval_extended_dynamics(const Vec& x, const Vec& u, const ModelParams& mp);

// Analytic Jacobians of the base model.
void linearize(const Vec& x, const Vec& u, const ModelParams& mp, Mat& A, Mat& B);

// Base input implied by an extended state and extended input.
Vec base_input_of(const Vec& xe, const Vec& ue);

using DerivFn = std::function<Vec(const Vec&, const Vec&)>;

// Classical RK4 with the input held over each of `substeps` intervals of h/substeps.
Vec rk4_step(const DerivFn& deriv, const Vec& x, const Vec& u, double h, int substeps = 1);

// Discrete one-substep transition with exact Jacobians, the form the solver consumes.
class DiscreteModel {
 public:
  virtual ~DiscreteModel() = default;
  virtual int nx() const = 0;
  virtual int nu() const = 0;
  // x_next = F(x, u) over one substep of length h. A = dF/dx, B = dF/du when non-null.
  virtual void step(const Vec& x, const Vec& u, double h, Vec& x_next, Mat* A, Mat* B) const = 0;
};

// RK4 on the base model.
class BaseModel final : public DiscreteModel {
 public:
  explicit BaseModel(ModelParams mp) : mp_(mp) {}
  int nx() const override { return kNx; }
  int nu() const override { return kNu; }
  void step(const Vec& x, const Vec& u, double h, Vec& x_next, Mat* A, Mat* B) const override;
  const ModelParams& params() const { return mp_; }

 private:
  ModelParams mp_;
};

// Extended model. Within a substep the base part sees the memory states as a held
// attitude command (RK4), and the memory integrates the rate input exactly.
class ExtendedModel final : public DiscreteModel {
 public:
  explicit ExtendedModel(ModelParams mp) : mp_(mp) {}
  int nx() const override { return kNxExt; }
  int nu() const override { return kNuExt; }
  void step(const Vec& x, const Vec& u, double h, Vec& x_next, Mat* A, Mat* B) const override;
  const ModelParams& params() const { return mp_; }

 private:
  ModelParams mp_;
};

// RK4 with Jacobians for any model given by (f, A, B) callbacks.
struct ContinuousJac {
  std::function<void(const Vec& x, const Vec& u, Vec& f, Mat* A, Mat* B)> eval;
};
void rk4_with_jacobians(const ContinuousJac& m, const Vec& x, const Vec& u, double h,
                        Vec& x_next, Mat* A, Mat* B);

// Polytopic system constraints over z = [x; u] (base ordering, 14 entries).
struct ZRow {
  Vec L;
  double l = 0.0;
  std::string name;
};

struct SystemBounds {
  double pxy_max = 15.0;
  double pz_min = 0.0;
  double pz_max = 4.0;
  double v_max = 2.0;
  double att_max = 30.0 * M_PI / 180.0;
  double a_min = 5.0;
  double a_max = 15.0;
  double att_cmd_max = 30.0 * M_PI / 180.0;
  double rate_max = 60.0 * M_PI / 180.0;  // extended-model input only
  bool operator==(const SystemBounds&) const = default;
};

struct PolytopeZ {
  std::vector<ZRow> rows;
  int n_s() const { return static_cast<int>(rows.size()); }
  // Interval width of the coordinate a row bounds, used for SDP weight normalization.
  std::vector<double> widths;
};

PolytopeZ make_polytope(const SystemBounds& b);

Vec eval_sys_constraints(const Vec& x, const Vec& u, const PolytopeZ& Z);

// 3x10 matrix picking position from the base state.
Mat position_selector();

}  // namespace hmpc
