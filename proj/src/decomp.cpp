#include "hmpc/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hmpc/kernels.hpp"

namespace hmpc {

using Eigen::Matrix2d;
using Eigen::Vector2d;

Matrix2d Ellipse::metric_matrix() const {
  const Matrix2d EEt = E * E.transpose();
  return EEt.inverse();
}

double Ellipse::metric(const Vector2d& p) const {
  const Vector2d d = p - c;
  return d.dot(metric_matrix() * d);
}

bool ConvexRegion::contains(const Vector2d& p, double tol) const { return violation(p, false) <= tol; }

bool ConvexRegion::contains_tight(const Vector2d& p, double tol) const {
  return violation(p, true) <= tol;
}

double ConvexRegion::violation(const Vector2d& p, bool tight) const {
  double worst = -1e300;
  for (const auto& h : (tight ? tightened : hs)) worst = std::max(worst, h.eval(p));
  return worst;
}

namespace {

HalfSpace make_hs(const Vector2d& n, const Vector2d& p) {
  // Same expression order as the partition kernel so that p itself is cut.
  return {n, (n.x() * p.x()) + (n.y() * p.y())};
}

Vector2d closest_on_segment(const Vector2d& a, const Vector2d& b, const Vector2d& q) {
  const Vector2d d = b - a;
  const double dd = d.squaredNorm();
  if (dd == 0.0) return a;
  const double t = std::clamp((q - a).dot(d) / dd, 0.0, 1.0);
  return a + t * d;
}

double cross(const Vector2d& o, const Vector2d& a, const Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

Vector2d closest_hull_point(const std::vector<Vector2d>& pts_in, const Vector2d& q) {
  if (pts_in.empty()) throw DecompError("closest_hull_point: empty point set");
  std::vector<Vector2d> pts = pts_in;
  std::sort(pts.begin(), pts.end(), [](const Vector2d& a, const Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() == 1) return pts[0];
  // Andrew's monotone chain, counter-clockwise.
  std::vector<Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() == 1) return hull[0];
  if (hull.size() == 2) return closest_on_segment(hull[0], hull[1], q);
  bool inside = true;
  for (std::size_t i = 0; i < hull.size(); ++i)
    if (cross(hull[i], hull[(i + 1) % hull.size()], q) < 0) inside = false;
  if (inside) return q;
  Vector2d best = hull[0];
  double bd = 1e300;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vector2d c = closest_on_segment(hull[i], hull[(i + 1) % hull.size()], q);
    const double d = (c - q).squaredNorm();
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  return best;
}

SegmentBox make_box(const Vector2d& a, const Vector2d& b, double box_width, const KeepIn* keep) {
  if (!(box_width > 0.0)) throw DecompError("box width must be positive");
  SegmentBox box;
  const double len = (b - a).norm();
  box.center = 0.5 * (a + b);
  double half_len = box_width;
  if (len > 1e-9) {
    box.axis = (b - a) / len;
    half_len += 0.5 * len;
  } else {
    box.axis = Vector2d::UnitX();
  }
  box.normal = Vector2d(-box.axis.y(), box.axis.x());
  const Vector2d dirs[4] = {box.axis, -box.axis, box.normal, -box.normal};
  const double half[4] = {half_len, half_len, box_width, box_width};
  for (int e = 0; e < 4; ++e) {
    double l = dirs[e].dot(box.center) + half[e];
    if (keep)
      for (const auto& s : keep->points) l = std::max(l, dirs[e].dot(s) + keep->margin);
    box.edges.push_back({dirs[e], l});
  }
  box.aabb_lo = Vector2d::Constant(1e300);
  box.aabb_hi = Vector2d::Constant(-1e300);
  for (double sa : {box.edges[0].l, -box.edges[1].l})
    for (double sn : {box.edges[2].l, -box.edges[3].l}) {
      const Vector2d corner = sa * box.axis + sn * box.normal;
      box.aabb_lo = box.aabb_lo.cwiseMin(corner);
      box.aabb_hi = box.aabb_hi.cwiseMax(corner);
    }
  return box;
}

ConvexRegion decompose_segment(const GridMap& map, const Vector2d& a, const Vector2d& b,
                               const DecompParams& prm, const KeepIn* keep, DecompStats* stats,
                               bool crop) {
  if (map.occupied_at(a) || map.occupied_at(b)) throw DecompError("segment endpoint occupied");
  const auto& K = kernels::active();
  const SegmentBox box = make_box(a, b, prm.box_width, keep);

  PointCloud pc = crop ? crop_cells(map, box.aabb_lo, box.aabb_hi) : all_cells(map);
  std::size_t n = pc.size();
  for (const auto& e : box.edges)
    n = K.keep_below(pc.x.data(), pc.y.data(), pc.id.data(), n, e.n.x(), e.n.y(), e.l);
  if (stats) {
    stats->cells_visited += pc.visited;
    stats->cells_in_box += n;
  }

  ConvexRegion reg;
  reg.seg_a = a;
  reg.seg_b = b;
  const Vector2d c = box.center;
  const double len = (b - a).norm();
  Matrix2d Rot;
  Rot.col(0) = box.axis;
  Rot.col(1) = box.normal;
  double ax, bx;
  auto metric_of = [&](double sa, double sb) {
    return Matrix2d(Rot * Eigen::Vector2d(1.0 / (sa * sa), 1.0 / (sb * sb)).asDiagonal() * Rot.transpose());
  };

  // Generating ellipse: start from a circle through the segment endpoints (or the
  // box half-width for a point) and shrink the minor axis onto interior points.
  std::vector<double> wx(pc.x.begin(), pc.x.begin() + n), wy(pc.y.begin(), pc.y.begin() + n);
  std::vector<std::int32_t> wid(pc.id.begin(), pc.id.begin() + n);
  if (len > 1e-9) {
    ax = bx = 0.5 * len;
    Matrix2d M = metric_of(ax, bx);
    std::size_t m = K.keep_inside(wx.data(), wy.data(), wid.data(), n, c.x(), c.y(), M(0, 0),
                                  2.0 * M(0, 1), M(1, 1), 1.0);
    while (m > 0) {
      const auto am = K.argmin(wx.data(), wy.data(), m, c.x(), c.y(), M(0, 0), 2.0 * M(0, 1), M(1, 1));
      const Vector2d local = Rot.transpose() * (Vector2d(wx[am.index], wy[am.index]) - c);
      const double r = 1.0 - (local.x() / ax) * (local.x() / ax);
      const double nb = r > 0.0 ? std::abs(local.y()) / std::sqrt(r) : 0.0;
      if (nb < 1e-6) throw DecompError("segment passes through an occupied cell");
      if (nb >= bx) {
        // Already on the boundary; rounding in a thin ellipse's metric kept it inside.
        wx.erase(wx.begin() + am.index);
        wy.erase(wy.begin() + am.index);
        wid.erase(wid.begin() + am.index);
        --m;
        continue;
      }
      bx = nb;
      M = metric_of(ax, bx);
      m = K.keep_inside(wx.data(), wy.data(), wid.data(), m, c.x(), c.y(), M(0, 0), 2.0 * M(0, 1),
                        M(1, 1), 1.0 - 1e-10);
      if (stats) ++stats->ellipse_shrinks;
    }
  } else {
    ax = bx = prm.box_width;
    if (n > 0) {
      const auto am = K.argmin(wx.data(), wy.data(), n, c.x(), c.y(), 1.0, 0.0, 1.0);
      const double d = std::sqrt(am.value);
      if (d < 1e-6) throw DecompError("segment endpoint occupied");
      ax = bx = std::min(ax, d);
    }
  }
  reg.gen.c = c;
  reg.gen.E = Rot * Vector2d(ax, bx).asDiagonal() * Rot.transpose();
  const Matrix2d M = metric_of(ax, bx);

  // Tangent planes, closest point first in the ellipse metric.
  while (n > 0) {
    const auto am = K.argmin(pc.x.data(), pc.y.data(), n, c.x(), c.y(), M(0, 0), 2.0 * M(0, 1), M(1, 1));
    const Vector2d p(pc.x[am.index], pc.y[am.index]);
    if (!reg.first_touch) reg.first_touch = Ellipse{reg.gen.E * std::sqrt(am.value), c};
    Vector2d g = M * (p - c);
    HalfSpace h = make_hs(g.normalized(), p);
    if (keep && !keep->points.empty()) {
      double smax = -1e300;
      for (const auto& s : keep->points) smax = std::max(smax, h.n.dot(s));
      if (smax > h.l - keep->margin) {
        const Vector2d q = closest_hull_point(keep->points, p);
        const double d = (p - q).norm();
        // Plans riding on a tightened boundary sit at the margin up to rounding.
        if (d < keep->margin - 1e-9)
          throw DecompError("previous plan passes within the margin of an obstacle cell");
        h = make_hs((p - q) / d, p);
        ++reg.n_separator;
      }
    }
    reg.hs.push_back(h);
    const std::size_t before = n;
    n = K.keep_below(pc.x.data(), pc.y.data(), pc.id.data(), n, h.n.x(), h.n.y(), h.l);
    if (n >= before) throw DecompError("tangent plane failed to remove its contact point");
  }
  reg.n_tangent = static_cast<int>(reg.hs.size());
  for (const auto& e : box.edges) reg.hs.push_back(e);
  for (auto& h : reg.hs) h.l -= 0.5 * prm.robot_radius;
  tighten_region(reg, prm.tighten);
  return reg;
}

void tighten_region(ConvexRegion& r, double margin) {
  if (margin < 0.0) throw DecompError("tightening must be non-negative");
  r.tighten = margin;
  r.tightened = r.hs;
  for (auto& h : r.tightened) h.l -= margin;
  const Vector2d mid = 0.5 * (r.seg_a + r.seg_b);
  r.tight_contains_midpoint = r.violation(mid, true) < 0.0;
  if (!r.tight_contains_midpoint)
    std::fprintf(stderr, "warning: tightened region %d excludes its segment midpoint\n", r.interval);
}

std::vector<ConvexRegion> i_decomp(const GridMap& map, const std::vector<Vector2d>& nodes,
                                   const DecompParams& prm, const std::vector<KeepIn>& keep_in,
                                   DecompStats* stats) {
  if (nodes.size() < 2) throw DecompError("i_decomp needs at least two nodes");
  const std::size_t N = nodes.size() - 1;
  if (!keep_in.empty() && keep_in.size() != N) throw DecompError("keep-in list size mismatch");
  std::vector<ConvexRegion> out;
  out.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const KeepIn* k = keep_in.empty() ? nullptr : &keep_in[i];
    try {
      out.push_back(decompose_segment(map, nodes[i], nodes[i + 1], prm, k, stats));
    } catch (const DecompError& e) {
      throw DecompError("interval " + std::to_string(i) + ": " + e.what());
    }
    out.back().interval = static_cast<int>(i);
  }
  return out;
}

Assumption1Report check_assumption1(const std::vector<ConvexRegion>& regions,
                                    const std::vector<std::vector<Vector2d>>& samples) {
  Assumption1Report rep;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    bool ok = true;
    if (regions[i].first_touch && i < samples.size()) {
      for (const auto& s : samples[i])
        if (std::sqrt(regions[i].first_touch->metric(s)) > 1.0 + 1e-9) ok = false;
    }
    rep.interval_ok.push_back(ok);
    rep.pass = rep.pass && ok;
  }
  return rep;
}

double region_area(const ConvexRegion& r, bool tight) {
  std::vector<Vector2d> poly = {{-1e3, -1e3}, {1e3, -1e3}, {1e3, 1e3}, {-1e3, 1e3}};
  for (const auto& h : (tight ? r.tightened : r.hs)) {
    std::vector<Vector2d> next;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vector2d& p = poly[i];
      const Vector2d& q = poly[(i + 1) % poly.size()];
      const double fp = h.eval(p), fq = h.eval(q);
      if (fp <= 0) next.push_back(p);
      if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) next.push_back(p + (fp / (fp - fq)) * (q - p));
    }
    poly.swap(next);
    if (poly.empty()) return 0.0;
  }
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vector2d& p = poly[i];
    const Vector2d& q = poly[(i + 1) % poly.size()];
    area += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(area);
}

std::string region_to_text(const ConvexRegion& r) {
  std::ostringstream os;
  os.precision(17);
  os << "region " << r.interval << " segment " << r.seg_a.x() << ' ' << r.seg_a.y() << ' '
     << r.seg_b.x() << ' ' << r.seg_b.y() << " tangent " << r.n_tangent << " separator "
     << r.n_separator << " tighten " << r.tighten << '\n';
  os << "ellipse " << r.gen.c.x() << ' ' << r.gen.c.y() << ' ' << r.gen.E(0, 0) << ' '
     << r.gen.E(0, 1) << ' ' << r.gen.E(1, 1) << '\n';
  for (const auto& h : r.hs) os << "hs " << h.n.x() << ' ' << h.n.y() << ' ' << h.l << '\n';
  return os.str();
}

}  // namespace hmpc
