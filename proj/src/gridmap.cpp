#include "hmpc/gridmap.hpp"

#include <algorithm>
#include <cmath>

namespace hmpc {

GridMap::GridMap(const MapSpec& spec) : spec_(spec) {
  if (!(spec.resolution > 0.0) || !(spec.width > 0.0) || !(spec.height > 0.0))
    throw MapError("map size and resolution must be positive");
  nx_ = static_cast<int>(std::lround(spec.width / spec.resolution));
  ny_ = static_cast<int>(std::lround(spec.height / spec.resolution));
  occ_.assign(static_cast<std::size_t>(nx_) * ny_, 0);
}

void GridMap::set(int ix, int iy) {
  auto& c = occ_[static_cast<std::size_t>(ix) * ny_ + iy];
  if (!c) {
    c = 1;
    ++count_;
  }
}

int GridMap::cell_x(double x) const {
  return static_cast<int>(std::floor((x - spec_.origin.x()) / spec_.resolution + 1e-9));
}

int GridMap::cell_y(double y) const {
  return static_cast<int>(std::floor((y - spec_.origin.y()) / spec_.resolution + 1e-9));
}

Eigen::Vector2d GridMap::center(int ix, int iy) const {
  return {spec_.origin.x() + (ix + 0.5) * spec_.resolution,
          spec_.origin.y() + (iy + 0.5) * spec_.resolution};
}

bool GridMap::occupied_at(const Eigen::Vector2d& p) const {
  const int ix = cell_x(p.x()), iy = cell_y(p.y());
  if (!in_bounds(ix, iy)) return true;
  return occupied(ix, iy);
}

void GridMap::finalize() {
  cols_.assign(nx_, {});
  for (int ix = 0; ix < nx_; ++ix) {
    const std::uint8_t* col = &occ_[static_cast<std::size_t>(ix) * ny_];
    for (int iy = 0; iy < ny_; ++iy)
      if (col[iy]) cols_[ix].push_back(iy);
  }
}

namespace {

void mark_contours(GridMap& m, const std::vector<Obstacle>& obstacles) {
  const MapSpec& s = m.spec();
  for (const auto& o : obstacles) {
    if (!(o.width > 0.0) || !(o.length > 0.0)) throw MapError("obstacle extents must be positive");
    const double x0 = o.center.x() - 0.5 * o.width, x1 = o.center.x() + 0.5 * o.width;
    const double y0 = o.center.y() - 0.5 * o.length, y1 = o.center.y() + 0.5 * o.length;
    if (x0 < s.origin.x() || y0 < s.origin.y() || x1 > s.origin.x() + s.width ||
        y1 > s.origin.y() + s.height)
      throw MapError("obstacle outside map");
    const int ix0 = std::clamp(m.cell_x(x0), 0, m.nx() - 1), ix1 = std::clamp(m.cell_x(x1), 0, m.nx() - 1);
    const int iy0 = std::clamp(m.cell_y(y0), 0, m.ny() - 1), iy1 = std::clamp(m.cell_y(y1), 0, m.ny() - 1);
    for (int ix = ix0; ix <= ix1; ++ix) {
      m.set(ix, iy0);
      m.set(ix, iy1);
    }
    for (int iy = iy0; iy <= iy1; ++iy) {
      m.set(ix0, iy);
      m.set(ix1, iy);
    }
  }
  for (int ix = 0; ix < m.nx(); ++ix) {
    m.set(ix, 0);
    m.set(ix, m.ny() - 1);
  }
  for (int iy = 0; iy < m.ny(); ++iy) {
    m.set(0, iy);
    m.set(m.nx() - 1, iy);
  }
}

}  // namespace

GridMap rasterize_contours(const MapSpec& spec, const std::vector<Obstacle>& obstacles) {
  GridMap m(spec);
  mark_contours(m, obstacles);
  m.finalize();
  return m;
}

GridMap rasterize(const MapSpec& spec, const std::vector<Obstacle>& obstacles, double robot_radius) {
  if (robot_radius < 0.0) throw MapError("robot radius must be non-negative");
  const GridMap contour = rasterize_contours(spec, obstacles);
  const int R = static_cast<int>(std::lround(robot_radius / 2.0 / spec.resolution));
  std::vector<std::pair<int, int>> disk;
  for (int dx = -R; dx <= R; ++dx)
    for (int dy = -R; dy <= R; ++dy)
      if (dx * dx + dy * dy <= R * R) disk.emplace_back(dx, dy);

  GridMap m(spec);
  for (int ix = 0; ix < contour.nx(); ++ix) {
    for (int iy : contour.column(ix)) {
      for (const auto& [dx, dy] : disk) {
        const int jx = ix + dx, jy = iy + dy;
        if (m.in_bounds(jx, jy)) m.set(jx, jy);
      }
    }
  }
  m.finalize();
  return m;
}

PointCloud crop_cells(const GridMap& map, const Eigen::Vector2d& lo, const Eigen::Vector2d& hi) {
  PointCloud pc;
  const double res = map.resolution();
  const Eigen::Vector2d o = map.spec().origin;
  // Cells whose center lies in [lo, hi].
  const int ix0 = std::max(0, static_cast<int>(std::ceil((lo.x() - o.x()) / res - 0.5)));
  const int ix1 = std::min(map.nx() - 1, static_cast<int>(std::floor((hi.x() - o.x()) / res - 0.5)));
  const int iy0 = std::max(0, static_cast<int>(std::ceil((lo.y() - o.y()) / res - 0.5)));
  const int iy1 = std::min(map.ny() - 1, static_cast<int>(std::floor((hi.y() - o.y()) / res - 0.5)));
  for (int ix = ix0; ix <= ix1; ++ix) {
    const auto& col = map.column(ix);
    auto it = std::lower_bound(col.begin(), col.end(), iy0);
    for (; it != col.end() && *it <= iy1; ++it) {
      const Eigen::Vector2d c = map.center(ix, *it);
      pc.x.push_back(c.x());
      pc.y.push_back(c.y());
      pc.id.push_back(map.cell_id(ix, *it));
      ++pc.visited;
    }
  }
  return pc;
}

PointCloud all_cells(const GridMap& map) {
  PointCloud pc;
  pc.x.reserve(map.occupied_count());
  pc.y.reserve(map.occupied_count());
  pc.id.reserve(map.occupied_count());
  for (int ix = 0; ix < map.nx(); ++ix) {
    for (int iy : map.column(ix)) {
      const Eigen::Vector2d c = map.center(ix, iy);
      pc.x.push_back(c.x());
      pc.y.push_back(c.y());
      pc.id.push_back(map.cell_id(ix, iy));
      ++pc.visited;
    }
  }
  return pc;
}

double rect_distance(const Eigen::Vector2d& p, const Obstacle& o) {
  const double dx = std::max(0.0, std::abs(p.x() - o.center.x()) - 0.5 * o.width);
  const double dy = std::max(0.0, std::abs(p.y() - o.center.y()) - 0.5 * o.length);
  return std::hypot(dx, dy);
}

}  // namespace hmpc
