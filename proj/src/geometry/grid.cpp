#include "primesh/geometry/grid.hpp"

#include <algorithm>
#include <numeric>

namespace primesh {

Box intersect(const Box& a, const Box& b) {
  Box out;
  for (int axis = 0; axis < 3; ++axis) {
    out.lo[axis] = std::max(a.lo[axis], b.lo[axis]);
    out.hi[axis] = std::min(a.hi[axis], b.hi[axis]);
  }
  return out;
}

std::vector<Box> subtract(const Box& a, const Box& b) {
  std::vector<Box> pieces;
  if (a.empty()) return pieces;
  const Box overlap = intersect(a, b);
  if (overlap.empty()) {
    pieces.push_back(a);
    return pieces;
  }
  // Peel slabs off `a` along x, then y, then z; what remains is the overlap.
  Box rest = a;
  for (int axis = 0; axis < 3; ++axis) {
    if (rest.lo[axis] < overlap.lo[axis]) {
      Box slab = rest;
      slab.hi[axis] = overlap.lo[axis];
      pieces.push_back(slab);
    }
    if (overlap.hi[axis] < rest.hi[axis]) {
      Box slab = rest;
      slab.lo[axis] = overlap.hi[axis];
      pieces.push_back(slab);
    }
    rest.lo[axis] = overlap.lo[axis];
    rest.hi[axis] = overlap.hi[axis];
  }
  return pieces;
}

OccupancyGrid::OccupancyGrid(int resolution) : resolution_(resolution) {
  require(resolution > 0, "OccupancyGrid: resolution must be positive");
  const auto r = static_cast<std::size_t>(resolution);
  cells_.assign(r * r * r, 0);
}

void OccupancyGrid::fill_box(const Box& box, bool value) {
  const Box clipped = intersect(box, Box{{0, 0, 0}, {resolution_, resolution_, resolution_}});
  if (clipped.empty()) return;
  for (int z = clipped.lo[2]; z < clipped.hi[2]; ++z)
    for (int y = clipped.lo[1]; y < clipped.hi[1]; ++y) {
      auto* row = cells_.data() + index(0, y, z);
      std::fill(row + clipped.lo[0], row + clipped.hi[0], value ? 1 : 0);
    }
}

std::size_t OccupancyGrid::count() const {
  return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](auto c) { return c != 0; }));
}

double iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  require(a.resolution() == b.resolution(), "iou: resolution mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto ca = a.cells();
  const auto cb = b.cells();
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const bool x = ca[i] != 0;
    const bool y = cb[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

VolumeTable::VolumeTable(const OccupancyGrid& grid) : resolution_(grid.resolution()) {
  const int r = resolution_;
  const auto n = static_cast<std::size_t>(r + 1);
  table_.assign(n * n * n, 0);
  auto idx = [n](int x, int y, int z) {
    return static_cast<std::size_t>(x) + n * (static_cast<std::size_t>(y) + n * z);
  };
  for (int z = 1; z <= r; ++z)
    for (int y = 1; y <= r; ++y)
      for (int x = 1; x <= r; ++x) {
        table_[idx(x, y, z)] = (grid.at(x - 1, y - 1, z - 1) ? 1 : 0) + table_[idx(x - 1, y, z)] +
                               table_[idx(x, y - 1, z)] + table_[idx(x, y, z - 1)] -
                               table_[idx(x - 1, y - 1, z)] - table_[idx(x - 1, y, z - 1)] -
                               table_[idx(x, y - 1, z - 1)] + table_[idx(x - 1, y - 1, z - 1)];
      }
  total_ = table_[idx(r, r, r)];
}

std::int64_t VolumeTable::count(const Box& box) const {
  const Box b = intersect(box, Box{{0, 0, 0}, {resolution_, resolution_, resolution_}});
  if (b.empty()) return 0;
  const auto [x0, y0, z0] = b.lo;
  const auto [x1, y1, z1] = b.hi;
  return at(x1, y1, z1) - at(x0, y1, z1) - at(x1, y0, z1) - at(x1, y1, z0) + at(x0, y0, z1) +
         at(x0, y1, z0) + at(x1, y0, z0) - at(x0, y0, z0);
}

}  // namespace primesh
