#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "primesh/geometry/grid.hpp"

namespace primesh {

using Point3 = std::array<double, 3>;

/// Points drawn uniformly from the exposed faces of occupied voxels (faces
/// between an occupied cell and an empty cell or the grid boundary).
/// Deterministic in `seed`. Empty grid yields no points.
std::vector<Point3> sample_surface_points(const OccupancyGrid& grid, std::size_t count, std::uint64_t seed);

/// Symmetric Chamfer distance in voxel units divided by `resolution`:
/// mean nearest distance a->b plus mean nearest distance b->a.
double chamfer_distance(std::span<const Point3> a, std::span<const Point3> b, int resolution);

/// Convenience: sample both grids' surfaces (2048 points each by default) and compare.
double chamfer_distance(const OccupancyGrid& a, const OccupancyGrid& b, std::size_t samples = 2048,
                        std::uint64_t seed = 0);

}  // namespace primesh
