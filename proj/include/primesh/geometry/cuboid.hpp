#pragma once

#include <span>
#include <vector>

#include "primesh/geometry/grid.hpp"

namespace primesh {

/// Axis-aligned cuboid primitive given by two diagonal corners. The corner
/// `v` is the minimum, `v_prime` the maximum; cells [v, v_prime) are inside.
struct Cuboid {
  Vec3i v{0, 0, 0};
  Vec3i v_prime{0, 0, 0};
  bool deleted = false;

  Box box() const { return deleted ? Box{} : Box{v, v_prime}; }
  std::int64_t volume() const { return box().volume(); }

  /// Checks the corner ordering, bounds and minimum-volume invariants.
  bool valid(int resolution) const;

  friend bool operator==(const Cuboid&, const Cuboid&) = default;
};

OccupancyGrid voxelize_cuboids(std::span<const Cuboid> cuboids, int resolution);

/// IoU of one (non-deleted) cuboid's rasterization against `target`.
double per_primitive_iou(const Cuboid& cuboid, const OccupancyGrid& target);

/// Same value as per_primitive_iou, in O(1) from a summed-volume table.
double per_primitive_iou(const Cuboid& cuboid, const VolumeTable& target);

/// Per-voxel coverage counters of a set of boxes against a fixed target, with
/// running union and intersection tallies. Editing one box touches only the
/// voxels in the symmetric difference of its old and new extent.
class CoverageGrid {
 public:
  struct Tally {
    std::int64_t covered = 0;       // cells under at least one box
    std::int64_t intersection = 0;  // covered cells that are also target cells
  };

  CoverageGrid() = default;
  explicit CoverageGrid(const OccupancyGrid& target);

  void add(const Box& box);
  void remove(const Box& box);
  void replace(const Box& from, const Box& to);

  /// Tallies that `replace(from, to)` would produce, without mutating.
  Tally preview_replace(const Box& from, const Box& to) const;

  const Tally& tally() const { return tally_; }

  /// IoU of the covered set against the target for the given tallies.
  double iou(const Tally& t) const {
    const std::int64_t uni = t.covered + target_count_ - t.intersection;
    return uni == 0 ? 0.0 : static_cast<double>(t.intersection) / static_cast<double>(uni);
  }
  double iou() const { return iou(tally_); }
  int resolution() const { return resolution_; }
  std::int64_t target_count() const { return target_count_; }

  /// Cells covered by at least one box.
  OccupancyGrid occupancy() const;

 private:
  template <typename Fn>
  void for_each_cell(const Box& box, Fn&& fn) const;

  void apply(const Box& box, int sign);

  int resolution_ = 0;
  std::int64_t target_count_ = 0;
  std::vector<std::uint8_t> target_;
  std::vector<std::uint8_t> counts_;
  Tally tally_;
};

}  // namespace primesh
