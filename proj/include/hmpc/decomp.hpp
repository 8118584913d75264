#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hmpc/gridmap.hpp"

namespace hmpc {

// { p : n' p <= l }, |n| = 1.
struct HalfSpace {
  Eigen::Vector2d n = Eigen::Vector2d::UnitX();
  double l = 0.0;
  double eval(const Eigen::Vector2d& p) const { return n.dot(p) - l; }
};

// { E u + c : |u| <= 1 }
struct Ellipse {
  Eigen::Matrix2d E = Eigen::Matrix2d::Identity();
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  // (p - c)' (E E')^-1 (p - c)
  double metric(const Eigen::Vector2d& p) const;
  Eigen::Matrix2d metric_matrix() const;
};

struct ConvexRegion {
  std::vector<HalfSpace> hs;        // after the r/2 shrink
  std::vector<HalfSpace> tightened; // hs shifted by the obstacle tightening
  Ellipse gen;
  Eigen::Vector2d seg_a = Eigen::Vector2d::Zero(), seg_b = Eigen::Vector2d::Zero();
  int interval = 0;
  int n_tangent = 0;      // half-spaces from obstacle points (the rest are box edges)
  int n_separator = 0;    // tangent planes replaced to keep the previous plan inside
  // Ellipse that produced the first tangent plane, grown until it touches the point.
  std::optional<Ellipse> first_touch;
  double tighten = 0.0;
  bool tight_contains_midpoint = true;

  bool contains(const Eigen::Vector2d& p, double tol = 0.0) const;
  bool contains_tight(const Eigen::Vector2d& p, double tol = 0.0) const;
  // Worst constraint value max_j (n_j' p - l_j) on hs or tightened.
  double violation(const Eigen::Vector2d& p, bool tight) const;
};

struct DecompError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DecompParams {
  double box_width = 1.0;     // bounding-box margin on each side of the segment
  double robot_radius = 0.3;
  double tighten = 0.0;       // obstacle tightening for the PMPC copy of the region
};

struct DecompStats {
  std::size_t cells_visited = 0;  // occupied cells touched during extraction
  std::size_t cells_in_box = 0;
  int ellipse_shrinks = 0;
};

// Points the region must keep inside by `margin` (previous plan samples over the
// interval the region will serve).
struct KeepIn {
  std::vector<Eigen::Vector2d> points;
  double margin = 0.0;
};

// Oriented bounding box around a segment, expanded so keep-in points stay inside.
struct SegmentBox {
  Eigen::Vector2d center, axis, normal;
  std::vector<HalfSpace> edges;  // +axis, -axis, +normal, -normal
  Eigen::Vector2d aabb_lo, aabb_hi;
};
SegmentBox make_box(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double box_width,
                    const KeepIn* keep = nullptr);

// Region around segment (a, b). When `crop` is false the whole map is scanned
// (used to measure the effect of cropping).
ConvexRegion decompose_segment(const GridMap& map, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                               const DecompParams& prm, const KeepIn* keep = nullptr,
                               DecompStats* stats = nullptr, bool crop = true);

void tighten_region(ConvexRegion& r, double margin);

// One region per consecutive node pair: region i from (nodes[i], nodes[i+1]).
// keep_in, when non-empty, gives one KeepIn per region.
std::vector<ConvexRegion> i_decomp(const GridMap& map, const std::vector<Eigen::Vector2d>& nodes,
                                   const DecompParams& prm, const std::vector<KeepIn>& keep_in = {},
                                   DecompStats* stats = nullptr);

struct Assumption1Report {
  std::vector<bool> interval_ok;
  bool pass = true;
};
// samples[i]: plan positions over interval i.
Assumption1Report check_assumption1(const std::vector<ConvexRegion>& regions,
                                    const std::vector<std::vector<Eigen::Vector2d>>& samples);

// Closest point of the convex hull of `pts` to q.
Eigen::Vector2d closest_hull_point(const std::vector<Eigen::Vector2d>& pts, const Eigen::Vector2d& q);

double region_area(const ConvexRegion& r, bool tight = false);

std::string region_to_text(const ConvexRegion& r);

}  // namespace hmpc
