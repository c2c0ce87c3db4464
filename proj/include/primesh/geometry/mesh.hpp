#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "primesh/geometry/grid.hpp"

namespace primesh {

/// Axis-perpendicular rectangular edge loop. Both corners share the
/// coordinate on `axis`; in-plane coordinates satisfy lo <= hi.
struct EdgeLoop {
  int axis = 0;
  Vec3i lo{0, 0, 0};
  Vec3i hi{0, 0, 0};
  int owner = 0;

  int position() const { return lo[axis]; }
  bool valid(int resolution) const;

  friend bool operator==(const EdgeLoop&, const EdgeLoop&) = default;
};

struct TriangleMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int, 3>> triangles;

  friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

/// Loops grouped by owner (ascending owner id), each group sorted along the
/// owner's axis. Throws ContractViolation if an owner has fewer than two
/// loops or mixes axes.
std::vector<std::vector<EdgeLoop>> group_by_owner(std::span<const EdgeLoop> loops);

/// Lofts consecutive loops of each owner into side quads and caps the ends.
TriangleMesh loft_mesh(std::span<const EdgeLoop> loops);

/// Solid of one owner's loft as one-voxel-thick boxes, one per slab along the
/// owner's axis. Only slabs whose centers fall in [slab_begin, slab_end) are
/// emitted. A cell is inside when its center lies strictly inside the
/// cross-section rectangle interpolated linearly between the two loops
/// bracketing the slab. Integer-aligned rectangles never put a center on an
/// edge, so unedited loops rasterize exactly like their cuboid.
std::vector<Box> loft_slab_boxes(std::span<const EdgeLoop> owner_loops, int resolution, int slab_begin,
                                 int slab_end);

OccupancyGrid voxelize_mesh(std::span<const EdgeLoop> loops, int resolution);

/// Writes an ASCII OBJ: one header comment, `v` lines, then 1-based `f` lines.
void export_obj(const TriangleMesh& mesh, std::ostream& out);
TriangleMesh parse_obj(std::istream& in);

}  // namespace primesh
