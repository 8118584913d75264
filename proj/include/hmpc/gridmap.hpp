#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hmpc {

struct MapSpec {
  double width = 12.0;   // x extent, meters
  double height = 12.0;  // y extent, meters
  double resolution = 0.01;
  Eigen::Vector2d origin{-6.0, -6.0};  // world coordinates of the corner of cell (0,0)
};

// Axis-aligned rectangle: `width` along x, `length` along y.
struct Obstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double width = 0.0;
  double length = 0.0;
};

struct MapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class GridMap {
 public:
  GridMap() = default;
  GridMap(const MapSpec& spec);

  const MapSpec& spec() const { return spec_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double resolution() const { return spec_.resolution; }

  bool occupied(int ix, int iy) const { return occ_[static_cast<std::size_t>(ix) * ny_ + iy] != 0; }
  void set(int ix, int iy);
  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_; }

  // Cell containing a world coordinate (floor with a small tolerance for points on a cell edge).
  int cell_x(double x) const;
  int cell_y(double y) const;
  Eigen::Vector2d center(int ix, int iy) const;
  bool occupied_at(const Eigen::Vector2d& p) const;

  std::size_t occupied_count() const { return count_; }
  // Sorted occupied rows per column; valid after finalize().
  const std::vector<int>& column(int ix) const { return cols_[ix]; }
  void finalize();

  std::int32_t cell_id(int ix, int iy) const { return ix * ny_ + iy; }

 private:
  MapSpec spec_;
  int nx_ = 0, ny_ = 0;
  std::vector<std::uint8_t> occ_;
  std::vector<std::vector<int>> cols_;
  std::size_t count_ = 0;
};

// Contour lines of each rectangle plus the map boundary, dilated by a disk of
// radius round(robot_radius / 2 / resolution) cells.
GridMap rasterize(const MapSpec& spec, const std::vector<Obstacle>& obstacles, double robot_radius);

// Contour cells only (no dilation), used by clearance oracles.
GridMap rasterize_contours(const MapSpec& spec, const std::vector<Obstacle>& obstacles);

// Occupied cell centers in structure-of-arrays form, ordered by (ix, iy).
struct PointCloud {
  std::vector<double> x, y;
  std::vector<std::int32_t> id;
  std::size_t visited = 0;  // occupied cells touched while extracting
  std::size_t size() const { return x.size(); }
};

// Occupied cells whose centers lie in the axis-aligned box [lo, hi].
PointCloud crop_cells(const GridMap& map, const Eigen::Vector2d& lo, const Eigen::Vector2d& hi);
// Every occupied cell of the map.
PointCloud all_cells(const GridMap& map);

// Distance from p to the nearest obstacle rectangle (0 inside).
double rect_distance(const Eigen::Vector2d& p, const Obstacle& o);

}  // namespace hmpc
