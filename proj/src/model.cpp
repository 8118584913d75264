#include "hmpc/model.hpp"

#include <cmath>
#include <sstream>

namespace hmpc {

void ModelParams::validate() const {
  for (double t : {tau_phi, tau_theta, tau_psi, tau_a})
    if (!(t > 0.0)) throw std::invalid_argument("model time constants must be positive");
  for (double k : {k_phi, k_theta, k_psi, k_a})
    if (!(k > 0.0)) throw std::invalid_argument("model gains must be positive");
  if (!(g > 0.0)) throw std::invalid_argument("gravity must be positive");
}

Vec QuadState::flat() const {
  Vec x(kNx);
  x << p, v, att, a;
  return x;
}

QuadState QuadState::from(const Vec& x) {
  if (x.size() < kNx) throw std::invalid_argument("QuadState needs 10 entries");
  QuadState s;
  s.p = x.segment<3>(0);
  s.v = x.segment<3>(3);
  s.att = x.segment<3>(6);
  s.a = x(9);
  return s;
}

QuadState QuadState::hover(const Eigen::Vector3d& p, double yaw, const ModelParams& mp) {
  QuadState s;
  s.p = p;
  s.att = {0.0, 0.0, yaw};
  s.a = mp.g;
  return s;
}

Vec QuadInput::flat() const {
  Vec u(kNu);
  u << att_cmd, a_cmd;
  return u;
}

QuadInput QuadInput::from(const Vec& u) {
  if (u.size() != kNu) throw std::invalid_argument("QuadInput needs 4 entries");
  QuadInput q;
  q.att_cmd = u.head<3>();
  q.a_cmd = u(3);
  return q;
}

QuadInput QuadInput::hover(double yaw, const ModelParams& mp) {
  QuadInput q;
  q.att_cmd = {0.0, 0.0, yaw};
  q.a_cmd = mp.g;
  return q;
}

namespace {

struct Trig {
  double sf, cf, st, ct, sp, cp;
  explicit Trig(const Vec& x)
      : sf(std::sin(x(ix::phi))), cf(std::cos(x(ix::phi))),
        st(std::sin(x(ix::theta))), ct(std::cos(x(ix::theta))),
        sp(std::sin(x(ix::psi))), cp(std::cos(x(ix::psi))) {}
};

void base_deriv(const Vec& x, const Vec& u, const ModelParams& mp, Vec& f) {
  const Trig t(x);
  const double a = x(ix::a);
  f.resize(kNx);
  f(0) = x(ix::vx);
  f(1) = x(ix::vy);
  f(2) = x(ix::vz);
  f(3) = (t.sf * t.sp + t.cf * t.st * t.cp) * a;
  f(4) = (-t.sf * t.cp + t.cf * t.st * t.sp) * a;
  f(5) = t.cf * t.ct * a - mp.g;
  f(6) = (-x(ix::phi) + mp.k_phi * u(0)) / mp.tau_phi;
  f(7) = (-x(ix::theta) + mp.k_theta * u(1)) / mp.tau_theta;
  f(8) = (-x(ix::psi) + mp.k_psi * u(2)) / mp.tau_psi;
  f(9) = (-x(ix::a) + mp.k_a * u(3)) / mp.tau_a;
}

void base_jac(const Vec& x, const ModelParams& mp, Mat& A, Mat& B) {
  const Trig t(x);
  const double a = x(ix::a);
  A.setZero(kNx, kNx);
  B.setZero(kNx, kNu);
  A(0, 3) = A(1, 4) = A(2, 5) = 1.0;
  // d(thrust direction)/d(roll, pitch, yaw) scaled by a, and the direction itself
  A(3, 6) = (t.cf * t.sp - t.sf * t.st * t.cp) * a;
  A(4, 6) = (-t.cf * t.cp - t.sf * t.st * t.sp) * a;
  A(5, 6) = -t.sf * t.ct * a;
  A(3, 7) = t.cf * t.ct * t.cp * a;
  A(4, 7) = t.cf * t.ct * t.sp * a;
  A(5, 7) = -t.cf * t.st * a;
  A(3, 8) = (t.sf * t.cp - t.cf * t.st * t.sp) * a;
  A(4, 8) = (t.sf * t.sp + t.cf * t.st * t.cp) * a;
  A(5, 8) = 0.0;
  A(3, 9) = t.sf * t.sp + t.cf * t.st * t.cp;
  A(4, 9) = -t.sf * t.cp + t.cf * t.st * t.sp;
  A(5, 9) = t.cf * t.ct;
  A(6, 6) = -1.0 / mp.tau_phi;
  A(7, 7) = -1.0 / mp.tau_theta;
  A(8, 8) = -1.0 / mp.tau_psi;
  A(9, 9) = -1.0 / mp.tau_a;
  B(6, 0) = mp.k_phi / mp.tau_phi;
  B(7, 1) = mp.k_theta / mp.tau_theta;
  B(8, 2) = mp.k_psi / mp.tau_psi;
  B(9, 3) = mp.k_a / mp.tau_a;
}

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

Vec eval_dynamics(const Vec& x, const Vec& u, const ModelParams& mp) {
  Vec f;
  base_deriv(x, u, mp, f);
  return f;
}

Vec base_input_of(const Vec& xe, const Vec& ue) {
  Vec ub(kNu);
  ub << xe.segment<3>(ix::mem_phi), ue(3);
  return ub;
}

Vec eval_extended_dynamics(const Vec& x, const Vec& u, const ModelParams& mp) {
  Vec f(kNxExt);
  Vec fb;
  base_deriv(x.head(kNx), base_input_of(x, u), mp, fb);
  f.head(kNx) = fb;
  f.tail<3>() = u.head<3>();
  return f;
}

void linearize(const Vec& x, const Vec& u, const ModelParams& mp, Mat& A, Mat& B) {
  (void)u;
  base_jac(x, mp, A, B);
}

Vec rk4_step(const DerivFn& deriv, const Vec& x, const Vec& u, double h, int substeps) {
  if (!(h > 0.0) || substeps < 1) throw std::invalid_argument("rk4_step: need h > 0 and substeps >= 1");
  const double dt = h / substeps;
  Vec xs = x;
  for (int s = 0; s < substeps; ++s) {
    const Vec k1 = deriv(xs, u);
    const Vec k2 = deriv(xs + 0.5 * dt * k1, u);
    const Vec k3 = deriv(xs + 0.5 * dt * k2, u);
    const Vec k4 = deriv(xs + dt * k3, u);
    xs = xs + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(xs)) {
      std::ostringstream os;
      os << "rk4_step: non-finite state at substep " << s;
      throw NumericError(os.str());
    }
  }
  return xs;
}

void rk4_with_jacobians(const ContinuousJac& m, const Vec& x, const Vec& u, double h,
                        Vec& x_next, Mat* A, Mat* B) {
  const bool jac = A != nullptr || B != nullptr;
  const Eigen::Index n = x.size();
  const Eigen::Index nu = u.size();
  Vec k1, k2, k3, k4;
  Mat A1, B1, A2, B2, A3, B3, A4, B4;
  m.eval(x, u, k1, jac ? &A1 : nullptr, jac ? &B1 : nullptr);
  const Vec x2 = x + 0.5 * h * k1;
  m.eval(x2, u, k2, jac ? &A2 : nullptr, jac ? &B2 : nullptr);
  const Vec x3 = x + 0.5 * h * k2;
  m.eval(x3, u, k3, jac ? &A3 : nullptr, jac ? &B3 : nullptr);
  const Vec x4 = x + h * k3;
  m.eval(x4, u, k4, jac ? &A4 : nullptr, jac ? &B4 : nullptr);
  x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!x_next.allFinite()) throw NumericError("rk4: non-finite state");
  if (!jac) return;

  const Mat I = Mat::Identity(n, n);
  const Mat K1x = A1;
  const Mat K1u = B1;
  const Mat K2x = A2 * (I + 0.5 * h * K1x);
  const Mat K2u = A2 * (0.5 * h * K1u) + B2;
  const Mat K3x = A3 * (I + 0.5 * h * K2x);
  const Mat K3u = A3 * (0.5 * h * K2u) + B3;
  const Mat K4x = A4 * (I + h * K3x);
  const Mat K4u = A4 * (h * K3u) + B4;
  if (A) *A = I + (h / 6.0) * (K1x + 2.0 * K2x + 2.0 * K3x + K4x);
  if (B) {
    *B = (h / 6.0) * (K1u + 2.0 * K2u + 2.0 * K3u + K4u);
    (void)nu;
  }
}

void BaseModel::step(const Vec& x, const Vec& u, double h, Vec& x_next, Mat* A, Mat* B) const {
  ContinuousJac cj{[this](const Vec& xx, const Vec& uu, Vec& f, Mat* Aa, Mat* Bb) {
    base_deriv(xx, uu, mp_, f);
    if (Aa) {
      Mat Bt;
      base_jac(xx, mp_, *Aa, Bt);
      if (Bb) *Bb = std::move(Bt);
    }
  }};
  rk4_with_jacobians(cj, x, u, h, x_next, A, B);
}

void ExtendedModel::step(const Vec& x, const Vec& u, double h, Vec& x_next, Mat* A, Mat* B) const {
  const Vec xb = x.head(kNx);
  const Vec ub = base_input_of(x, u);
  Vec xb_next;
  Mat Ab, Bb;
  const bool jac = A != nullptr || B != nullptr;
  BaseModel(mp_).step(xb, ub, h, xb_next, jac ? &Ab : nullptr, jac ? &Bb : nullptr);
  x_next.resize(kNxExt);
  x_next.head(kNx) = xb_next;
  x_next.tail<3>() = x.tail<3>() + h * u.head<3>();
  if (A) {
    A->setZero(kNxExt, kNxExt);
    A->topLeftCorner(kNx, kNx) = Ab;
    A->block(0, kNx, kNx, 3) = Bb.leftCols(3);
    A->bottomRightCorner(3, 3).setIdentity();
  }
  if (B) {
    B->setZero(kNxExt, kNuExt);
    B->block(0, 3, kNx, 1) = Bb.col(3);
    B->block(kNx, 0, 3, 3) = h * Eigen::Matrix3d::Identity();
  }
}

PolytopeZ make_polytope(const SystemBounds& b) {
  PolytopeZ Z;
  const int nz = kNx + kNu;
  std::vector<double> lo(nz), hi(nz);
  const char* names[] = {"px", "py", "pz", "vx", "vy", "vz", "phi", "theta", "psi", "a",
                         "phi_c", "theta_c", "psi_c", "a_c"};
  lo[0] = lo[1] = -b.pxy_max;
  hi[0] = hi[1] = b.pxy_max;
  lo[2] = b.pz_min;
  hi[2] = b.pz_max;
  for (int i = 3; i < 6; ++i) lo[i] = -b.v_max, hi[i] = b.v_max;
  for (int i = 6; i < 9; ++i) lo[i] = -b.att_max, hi[i] = b.att_max;
  lo[9] = b.a_min;
  hi[9] = b.a_max;
  for (int i = 10; i < 13; ++i) lo[i] = -b.att_cmd_max, hi[i] = b.att_cmd_max;
  lo[13] = b.a_min;
  hi[13] = b.a_max;
  for (int i = 0; i < nz; ++i) {
    if (!(hi[i] > lo[i])) throw std::invalid_argument(std::string("empty bound interval for ") + names[i]);
    ZRow up{Vec::Zero(nz), hi[i], std::string(names[i]) + "_max"};
    up.L(i) = 1.0;
    ZRow dn{Vec::Zero(nz), -lo[i], std::string(names[i]) + "_min"};
    dn.L(i) = -1.0;
    Z.rows.push_back(std::move(up));
    Z.rows.push_back(std::move(dn));
    Z.widths.push_back(hi[i] - lo[i]);
    Z.widths.push_back(hi[i] - lo[i]);
  }
  return Z;
}

Vec eval_sys_constraints(const Vec& x, const Vec& u, const PolytopeZ& Z) {
  if (x.size() != kNx || u.size() != kNu)
    throw std::invalid_argument("eval_sys_constraints: expected 10 states and 4 inputs");
  Vec z(kNx + kNu);
  z << x, u;
  Vec g(Z.n_s());
  for (int j = 0; j < Z.n_s(); ++j) g(j) = Z.rows[j].L.dot(z) - Z.rows[j].l;
  return g;
}

Mat position_selector() {
  Mat C = Mat::Zero(3, kNx);
  C(0, 0) = C(1, 1) = C(2, 2) = 1.0;
  return C;
}

}  // namespace hmpc
