#include "hmpc/terminal.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hmpc {

namespace {

std::vector<double> linspace(double lo, double hi, int n, double single) {
  if (n == 1) return {single};
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

Mat sym_sqrt(const Mat& M) {
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  return es.operatorSqrt();
}

// Adds the upper triangle of a dense symmetric coefficient to block var.
void add_dense(LmiBlock& b, int var, const Mat& F) {
  for (int c = 0; c < F.cols(); ++c)
    for (int r = 0; r <= c; ++r)
      if (F(r, c) != 0.0) b.add(var, r, c, F(r, c));
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<Vec> build_grid(const SystemBounds& b, const GridSpec& spec, const ModelParams& mp) {
  if (spec.att_points < 1 || spec.accel_points < 1) throw DesignError("empty linearization grid");
  const auto att = linspace(-b.att_max, b.att_max, spec.att_points, 0.0);
  const auto acc = linspace(b.a_min, b.a_max, spec.accel_points, mp.g);
  std::vector<Vec> pts;
  pts.reserve(att.size() * att.size() * att.size() * acc.size());
  for (double f : att)
    for (double t : att)
      for (double p : att)
        for (double a : acc) {
          Vec z = Vec::Zero(kNx + kNu);
          z(ix::phi) = f;
          z(ix::theta) = t;
          z(ix::psi) = p;
          z(ix::a) = a;
          z.tail(kNu) << f, t, p, a;
          pts.push_back(std::move(z));
        }
  return pts;
}

int SdpLayout::x_index(int r, int c) const {
  if (r > c) std::swap(r, c);
  // upper triangle, column by column
  return c * (c + 1) / 2 + r;
}

Mat SdpLayout::X(const Vec& y) const {
  Mat X(nx, nx);
  for (int c = 0; c < nx; ++c)
    for (int r = 0; r <= c; ++r) X(r, c) = X(c, r) = y(x_index(r, c));
  return X;
}

Mat SdpLayout::Y(const Vec& y) const {
  Mat Y(nu, nx);
  for (int c = 0; c < nx; ++c)
    for (int r = 0; r < nu; ++r) Y(r, c) = y(y_index(r, c));
  return Y;
}

SdpProblem assemble_lmis(const std::vector<Vec>& points, const Mat& Q, const Mat& R,
                         const PolytopeZ& Z, const ModelParams& mp, double weight_scale) {
  const int nx = kNx, nu = kNu;
  if (Q.rows() != nx || Q.cols() != nx || R.rows() != nu || R.cols() != nu)
    throw DesignError("assemble_lmis: Q must be 10x10 and R 4x4");
  SdpLayout lay;
  lay.n_s = Z.n_s();
  SdpProblem prob;
  prob.m = lay.m();
  prob.c = Vec::Zero(prob.m);
  for (int j = 0; j < lay.n_s; ++j)
    prob.c(lay.cs_index(j)) = weight_scale / (Z.widths[j] * Z.widths[j]);

  const Mat Qh = sym_sqrt(Q);
  const Mat Rh = sym_sqrt(R);
  const int nb = nx + nx + nu;

  // Decrease condition, negated so that the block must be PSD.
  for (const Vec& z : points) {
    Mat A, B;
    linearize(z.head(nx), z.tail(nu), mp, A, B);
    LmiBlock blk;
    blk.n = nb;
    blk.F0 = Mat::Zero(nb, nb);
    blk.F0.bottomRightCorner(nx + nu, nx + nu).setIdentity();
    for (int c = 0; c < nx; ++c)
      for (int r = 0; r <= c; ++r) {
        Mat E = Mat::Zero(nx, nx);
        E(r, c) = 1.0;
        E(c, r) = 1.0;
        Mat F = Mat::Zero(nb, nb);
        const Mat AE = A * E;
        F.topLeftCorner(nx, nx) = -(AE + AE.transpose());
        F.block(nx, 0, nx, nx) = -Qh * E;
        F.block(0, nx, nx, nx) = (-Qh * E).transpose();
        add_dense(blk, lay.x_index(r, c), F);
      }
    for (int c = 0; c < nx; ++c)
      for (int r = 0; r < nu; ++r) {
        Mat E = Mat::Zero(nu, nx);
        E(r, c) = 1.0;
        Mat F = Mat::Zero(nb, nb);
        const Mat BE = B * E;
        F.topLeftCorner(nx, nx) = -(BE + BE.transpose());
        F.block(2 * nx, 0, nu, nx) = -Rh * E;
        F.block(0, 2 * nx, nx, nu) = (-Rh * E).transpose();
        add_dense(blk, lay.y_index(r, c), F);
      }
    prob.blocks.push_back(std::move(blk));
  }

  // Constraint rows: [c_s^2, L [X; Y]; *, X] >= 0.
  for (int j = 0; j < lay.n_s; ++j) {
    const Vec& L = Z.rows[j].L;
    const Vec Lx = L.head(nx);
    const Vec Lu = L.tail(nu);
    LmiBlock blk;
    blk.n = 1 + nx;
    blk.F0 = Mat::Zero(blk.n, blk.n);
    blk.add(lay.cs_index(j), 0, 0, 1.0);
    for (int c = 0; c < nx; ++c)
      for (int r = 0; r <= c; ++r) {
        Mat F = Mat::Zero(blk.n, blk.n);
        Mat E = Mat::Zero(nx, nx);
        E(r, c) = 1.0;
        E(c, r) = 1.0;
        const Eigen::RowVectorXd v = Lx.transpose() * E;
        F.block(0, 1, 1, nx) = v;
        F.block(1, 0, nx, 1) = v.transpose();
        F.bottomRightCorner(nx, nx) = E;
        add_dense(blk, lay.x_index(r, c), F);
      }
    for (int c = 0; c < nx; ++c)
      for (int r = 0; r < nu; ++r) {
        if (Lu(r) == 0.0) continue;
        blk.add(lay.y_index(r, c), 0, 1 + c, Lu(r));
      }
    prob.blocks.push_back(std::move(blk));
  }

  LmiBlock xb;
  xb.n = nx;
  xb.F0 = Mat::Zero(nx, nx);
  for (int c = 0; c < nx; ++c)
    for (int r = 0; r <= c; ++r) xb.add(lay.x_index(r, c), r, c, 1.0);
  prob.blocks.push_back(std::move(xb));
  prob.logdet_block = static_cast<int>(prob.blocks.size()) - 1;
  return prob;
}

SdpSolution solve_design_sdp(const SdpProblem& prob, const PolytopeZ& Z, const SdpSettings& s) {
  SdpLayout lay;
  lay.n_s = Z.n_s();
  Vec y0 = Vec::Zero(prob.m);
  // Tracking gains this large put X near 1e-3; starting there saves many damped steps.
  for (int c = 0; c < kNx; ++c) y0(lay.x_index(c, c)) = 1e-3;
  for (int j = 0; j < lay.n_s; ++j) y0(lay.cs_index(j)) = 1.0;
  SdpSolution sol;
  sol.raw = solve_sdp(prob, y0, s);
  if (!sol.raw.feasible)
    throw DesignError("terminal SDP infeasible (" + sol.raw.message +
                      "); consider a parameter-varying X(z), Y(z) formulation or a smaller state box");
  if (!sol.raw.converged) throw DesignError("terminal SDP did not converge: " + sol.raw.message);
  sol.X = lay.X(sol.raw.y);
  sol.Y = lay.Y(sol.raw.y);
  sol.c_s_sq.resize(lay.n_s);
  for (int j = 0; j < lay.n_s; ++j) sol.c_s_sq(j) = sol.raw.y(lay.cs_index(j));
  return sol;
}

void compute_PK(const Mat& X, const Mat& Y, Mat& P, Mat& K) {
  Eigen::LLT<Mat> llt(X);
  if (llt.info() != Eigen::Success) throw DesignError("compute_PK: X is not positive definite");
  P = llt.solve(Mat::Identity(X.rows(), X.cols()));
  P = 0.5 * (P + P.transpose()).eval();
  K = Y * P;
}

void compute_tighteners(const Mat& P, const Mat& K, const PolytopeZ& Z, const Mat& C, Vec& c_s,
                        double& c_o) {
  Eigen::SelfAdjointEigenSolver<Mat> es(P);
  const Mat Pmh = es.operatorInverseSqrt();
  c_s.resize(Z.n_s());
  for (int j = 0; j < Z.n_s(); ++j) {
    const Vec& L = Z.rows[j].L;
    const Vec w = L.head(kNx) + K.transpose() * L.tail(kNu);
    c_s(j) = (Pmh * w).norm();
  }
  Eigen::JacobiSVD<Mat> svd(Pmh * C.transpose());
  c_o = svd.singularValues()(0);
}

double compute_alpha(double d, double c_o) {
  if (!(d > 0.0)) throw DesignError("obstacle margin d must be positive");
  if (!(c_o > 0.0)) throw DesignError("c_o must be positive");
  return d / c_o;
}

LmiReport verify_lmis(const TerminalIngredients& ti, const Mat& Q, const Mat& R,
                      const std::vector<Vec>& points, const PolytopeZ& Z, const ModelParams& mp,
                      double tol) {
  LmiReport rep;
  rep.points = static_cast<int>(points.size());
  const Mat KRK = ti.K.transpose() * R * ti.K;
  for (const Vec& z : points) {
    Mat A, B;
    linearize(z.head(kNx), z.tail(kNu), mp, A, B);
    const Mat Acl = A + B * ti.K;
    const Mat M = Acl.transpose() * ti.P + ti.P * Acl + Q + KRK;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    const double e = es.eigenvalues().maxCoeff();
    if (e > tol) ++rep.failures;
    if (e > rep.worst_eig) {
      rep.worst_eig = e;
      rep.worst_point = z;
    }
  }
  rep.tightened_width.resize(Z.n_s());
  for (int j = 0; j < Z.n_s(); ++j) {
    rep.tightened_width(j) = Z.widths[j] - 2.0 * ti.alpha * ti.c_s(j);
    if (!(rep.tightened_width(j) > 0.0)) rep.tightened_nonempty = false;
  }
  rep.pass = rep.failures == 0 && rep.tightened_nonempty;
  return rep;
}

std::uint64_t design_fingerprint(const ModelParams& mp, const SystemBounds& b) {
  std::ostringstream os;
  os << "order:px,py,pz,vx,vy,vz,phi,theta,psi,a|phi_c,theta_c,psi_c,a_c;";
  for (double v : {mp.tau_phi, mp.tau_theta, mp.tau_psi, mp.tau_a, mp.k_phi, mp.k_theta, mp.k_psi,
                   mp.k_a, mp.g})
    os << fmt17(v) << ',';
  os << ';';
  for (double v : {b.pxy_max, b.pz_min, b.pz_max, b.v_max, b.att_max, b.a_min, b.a_max,
                   b.att_cmd_max})
    os << fmt17(v) << ',';
  // FNV-1a, 64 bit
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {
std::string design_note(const TerminalDesignSpec& spec) { return "weight_scale " + fmt17(spec.weight_scale); }
}  // namespace

bool ingredients_match(const TerminalIngredients& ti, const TerminalDesignSpec& spec, const ModelParams& mp,
                       const SystemBounds& b) {
  return ti.fingerprint == design_fingerprint(mp, b) && ti.Q == spec.Q && ti.R == spec.R &&
         ti.solve_grid == spec.solve_grid && ti.note.rfind(design_note(spec) + " ", 0) == 0 &&
         ti.alpha == compute_alpha(spec.d, ti.c_o);
}

TerminalIngredients design_terminal(const TerminalDesignSpec& spec, const ModelParams& mp,
                                    const SystemBounds& b, LmiReport* check_report) {
  const PolytopeZ Z = make_polytope(b);
  const auto pts = build_grid(b, spec.solve_grid, mp);
  const SdpProblem prob = assemble_lmis(pts, spec.Q, spec.R, Z, mp, spec.weight_scale);
  const SdpSolution sol = solve_design_sdp(prob, Z, spec.sdp);
  TerminalIngredients ti;
  compute_PK(sol.X, sol.Y, ti.P, ti.K);
  compute_tighteners(ti.P, ti.K, Z, position_selector(), ti.c_s, ti.c_o);
  ti.alpha = compute_alpha(spec.d, ti.c_o);
  ti.fingerprint = design_fingerprint(mp, b);
  ti.Q = spec.Q;
  ti.R = spec.R;
  ti.solve_grid = spec.solve_grid;
  ti.check_grid = spec.check_grid;
  ti.note = design_note(spec) + " sdp_iterations " + std::to_string(sol.raw.iterations);
  if (check_report) {
    const auto chk = build_grid(b, spec.check_grid, mp);
    *check_report = verify_lmis(ti, spec.Q, spec.R, chk, Z, mp, spec.check_tol);
  }
  return ti;
}

namespace {

void put_matrix(std::ostream& os, const char* name, const Mat& M) {
  os << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (int r = 0; r < M.rows(); ++r) {
    for (int c = 0; c < M.cols(); ++c) os << (c ? " " : "") << fmt17(M(r, c));
    os << '\n';
  }
}

Mat get_matrix(std::istream& is, const std::string& name) {
  std::string tag;
  int rows = 0, cols = 0;
  if (!(is >> tag >> rows >> cols) || tag != name || rows < 0 || cols < 0)
    throw DesignError("ingredient file: expected matrix " + name);
  Mat M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!(is >> M(r, c))) throw DesignError("ingredient file: truncated matrix " + name);
  return M;
}

}  // namespace

std::string ingredients_to_string(const TerminalIngredients& ti) {
  std::ostringstream os;
  char fp[32];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(ti.fingerprint));
  os << "hmpc-terminal-ingredients 1\n";
  os << "fingerprint " << fp << '\n';
  os << "ordering px py pz vx vy vz phi theta psi a | phi_c theta_c psi_c a_c\n";
  os << "grid " << ti.solve_grid.att_points << ' ' << ti.solve_grid.accel_points << ' '
     << ti.check_grid.att_points << ' ' << ti.check_grid.accel_points << '\n';
  os << "note " << (ti.note.empty() ? "-" : ti.note) << '\n';
  os << "alpha " << fmt17(ti.alpha) << '\n';
  os << "c_o " << fmt17(ti.c_o) << '\n';
  put_matrix(os, "P", ti.P);
  put_matrix(os, "K", ti.K);
  put_matrix(os, "c_s", ti.c_s.transpose());
  put_matrix(os, "Q", ti.Q);
  put_matrix(os, "R", ti.R);
  return os.str();
}

void save_ingredients(const std::string& path, const TerminalIngredients& ti) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DesignError("cannot write " + path);
  f << ingredients_to_string(ti);
}

TerminalIngredients ingredients_from_string(const std::string& text, std::uint64_t expected_fp) {
  std::istringstream is(text);
  std::string line, tag;
  std::getline(is, line);
  if (line != "hmpc-terminal-ingredients 1") throw DesignError("not an ingredient file (version 1)");
  TerminalIngredients ti;
  std::string fp;
  is >> tag >> fp;
  if (tag != "fingerprint") throw DesignError("ingredient file: missing fingerprint");
  try {
    std::size_t used = 0;
    ti.fingerprint = std::stoull(fp, &used, 16);
    if (used != fp.size()) throw std::invalid_argument(fp);
  } catch (const std::exception&) {
    throw DesignError("ingredient file: malformed fingerprint '" + fp + "'");
  }
  if (expected_fp != 0 && ti.fingerprint != expected_fp)
    throw DesignError("ingredient fingerprint " + fp +
                      " does not match the current model/constraint configuration");
  std::getline(is, line);
  std::getline(is, line);  // ordering
  is >> tag >> ti.solve_grid.att_points >> ti.solve_grid.accel_points >> ti.check_grid.att_points >>
      ti.check_grid.accel_points;
  if (tag != "grid") throw DesignError("ingredient file: missing grid line");
  is >> tag;
  std::getline(is, ti.note);
  if (!ti.note.empty() && ti.note.front() == ' ') ti.note.erase(0, 1);
  if (ti.note == "-") ti.note.clear();
  is >> tag >> ti.alpha;
  if (tag != "alpha") throw DesignError("ingredient file: missing alpha");
  is >> tag >> ti.c_o;
  if (tag != "c_o") throw DesignError("ingredient file: missing c_o");
  ti.P = get_matrix(is, "P");
  ti.K = get_matrix(is, "K");
  ti.c_s = get_matrix(is, "c_s").transpose();
  ti.Q = get_matrix(is, "Q");
  ti.R = get_matrix(is, "R");
  if (ti.P.rows() != kNx || ti.P.cols() != kNx || ti.K.rows() != kNu || ti.K.cols() != kNx)
    throw DesignError("ingredient file: unexpected P/K dimensions");
  return ti;
}

TerminalIngredients load_ingredients(const std::string& path, std::uint64_t expected_fp) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DesignError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ingredients_from_string(ss.str(), expected_fp);
}

Vec terminal_control(const Vec& x, const Vec& xr, const Vec& ur, const TerminalIngredients& ti) {
  return ur + ti.K * (x.head(kNx) - xr.head(kNx));
}

double p_norm(const Vec& dx, const Mat& P) { return std::sqrt(std::max(0.0, dx.dot(P * dx))); }

}  // namespace hmpc
