#include "primesh/geometry/cuboid.hpp"

namespace primesh {

bool Cuboid::valid(int resolution) const {
  if (deleted) return true;
  for (int axis = 0; axis < 3; ++axis) {
    if (v[axis] < 0 || v_prime[axis] > resolution) return false;
    if (v[axis] >= v_prime[axis]) return false;
  }
  return true;
}

OccupancyGrid voxelize_cuboids(std::span<const Cuboid> cuboids, int resolution) {
  OccupancyGrid grid(resolution);
  for (const auto& c : cuboids)
    if (!c.deleted) grid.fill_box(c.box());
  return grid;
}

double per_primitive_iou(const Cuboid& cuboid, const OccupancyGrid& target) {
  require(!cuboid.deleted, "per_primitive_iou: primitive is deleted");
  const Cuboid single[] = {cuboid};
  return iou(voxelize_cuboids(single, target.resolution()), target);
}

double per_primitive_iou(const Cuboid& cuboid, const VolumeTable& target) {
  require(!cuboid.deleted, "per_primitive_iou: primitive is deleted");
  const Box box = intersect(cuboid.box(), Box{{0, 0, 0}, {target.resolution(), target.resolution(), target.resolution()}});
  const std::int64_t inter = target.count(box);
  const std::int64_t uni = box.volume() + target.total() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

CoverageGrid::CoverageGrid(const OccupancyGrid& target) : resolution_(target.resolution()) {
  target_.assign(target.cells().begin(), target.cells().end());
  counts_.assign(target_.size(), 0);
  target_count_ = static_cast<std::int64_t>(target.count());
}

template <typename Fn>
void CoverageGrid::for_each_cell(const Box& box, Fn&& fn) const {
  const Box b = intersect(box, Box{{0, 0, 0}, {resolution_, resolution_, resolution_}});
  if (b.empty()) return;
  const auto r = static_cast<std::size_t>(resolution_);
  for (int z = b.lo[2]; z < b.hi[2]; ++z)
    for (int y = b.lo[1]; y < b.hi[1]; ++y) {
      const std::size_t row = r * (static_cast<std::size_t>(y) + r * z);
      for (int x = b.lo[0]; x < b.hi[0]; ++x) fn(row + static_cast<std::size_t>(x));
    }
}

void CoverageGrid::apply(const Box& box, int sign) {
  for_each_cell(box, [&](std::size_t i) {
    auto& c = counts_[i];
    if (sign > 0) {
      if (c == 0) {
        ++tally_.covered;
        tally_.intersection += target_[i];
      }
      ++c;
    } else {
      --c;
      if (c == 0) {
        --tally_.covered;
        tally_.intersection -= target_[i];
      }
    }
  });
}

void CoverageGrid::add(const Box& box) { apply(box, +1); }
void CoverageGrid::remove(const Box& box) { apply(box, -1); }

void CoverageGrid::replace(const Box& from, const Box& to) {
  for (const auto& piece : subtract(to, from)) apply(piece, +1);
  for (const auto& piece : subtract(from, to)) apply(piece, -1);
}

CoverageGrid::Tally CoverageGrid::preview_replace(const Box& from, const Box& to) const {
  Tally out = tally_;
  for (const auto& piece : subtract(to, from))
    for_each_cell(piece, [&](std::size_t i) {
      if (counts_[i] == 0) {
        ++out.covered;
        out.intersection += target_[i];
      }
    });
  for (const auto& piece : subtract(from, to))
    for_each_cell(piece, [&](std::size_t i) {
      if (counts_[i] == 1) {
        --out.covered;
        out.intersection -= target_[i];
      }
    });
  return out;
}

OccupancyGrid CoverageGrid::occupancy() const {
  OccupancyGrid grid(resolution_);
  auto cells = grid.cells();
  for (std::size_t i = 0; i < counts_.size(); ++i) cells[i] = counts_[i] > 0 ? 1 : 0;
  return grid;
}

}  // namespace primesh
