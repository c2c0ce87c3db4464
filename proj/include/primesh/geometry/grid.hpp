#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "primesh/error.hpp"

namespace primesh {

using Vec3i = std::array<int, 3>;

/// Half-open integer box [lo, hi) in voxel units. Empty when any hi <= lo.
struct Box {
  Vec3i lo{0, 0, 0};
  Vec3i hi{0, 0, 0};

  bool empty() const { return hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2]; }
  std::int64_t volume() const {
    if (empty()) return 0;
    return std::int64_t{hi[0] - lo[0]} * (hi[1] - lo[1]) * (hi[2] - lo[2]);
  }
  bool contains_cell(int x, int y, int z) const {
    return x >= lo[0] && x < hi[0] && y >= lo[1] && y < hi[1] && z >= lo[2] && z < hi[2];
  }
  friend bool operator==(const Box&, const Box&) = default;
};

Box intersect(const Box& a, const Box& b);

/// Cells of `a` not in `b`, as at most six disjoint boxes.
std::vector<Box> subtract(const Box& a, const Box& b);

/// Boolean voxel field of resolution R^3, stored x-fastest.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(int resolution);

  int resolution() const { return resolution_; }
  std::size_t size() const { return cells_.size(); }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(resolution_) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(resolution_) * z);
  }
  bool at(int x, int y, int z) const { return cells_[index(x, y, z)] != 0; }
  void set(int x, int y, int z, bool value) { cells_[index(x, y, z)] = value ? 1 : 0; }

  void fill_box(const Box& box, bool value = true);

  std::span<const std::uint8_t> cells() const { return cells_; }
  std::span<std::uint8_t> cells() { return cells_; }

  std::size_t count() const;

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  int resolution_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// |a & b| / |a | b|, or 0 when the union is empty.
double iou(const OccupancyGrid& a, const OccupancyGrid& b);

/// 3D summed-volume table over a grid; counts occupied cells in any box in O(1).
class VolumeTable {
 public:
  VolumeTable() = default;
  explicit VolumeTable(const OccupancyGrid& grid);

  std::int64_t count(const Box& box) const;
  std::int64_t total() const { return total_; }
  int resolution() const { return resolution_; }

 private:
  std::int64_t at(int x, int y, int z) const {
    const auto n = static_cast<std::size_t>(resolution_ + 1);
    return table_[static_cast<std::size_t>(x) + n * (static_cast<std::size_t>(y) + n * z)];
  }

  int resolution_ = 0;
  std::int64_t total_ = 0;
  std::vector<std::int64_t> table_;
};

}  // namespace primesh
