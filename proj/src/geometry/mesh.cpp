#include "primesh/geometry/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace primesh {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

std::array<Vec3i, 4> rectangle_corners(const EdgeLoop& loop) {
  const int b = (loop.axis + 1) % 3;
  const int c = (loop.axis + 2) % 3;
  std::array<Vec3i, 4> corners{loop.lo, loop.lo, loop.lo, loop.lo};
  corners[1][b] = loop.hi[b];
  corners[2][b] = loop.hi[b];
  corners[2][c] = loop.hi[c];
  corners[3][c] = loop.hi[c];
  return corners;
}

void write_number(std::ostream& out, double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  out.write(buf, end - buf);
}

}  // namespace

bool EdgeLoop::valid(int resolution) const {
  if (axis < 0 || axis > 2) return false;
  if (lo[axis] != hi[axis]) return false;
  for (int i = 0; i < 3; ++i) {
    if (lo[i] < 0 || hi[i] > resolution || lo[i] > hi[i]) return false;
  }
  return true;
}

std::vector<std::vector<EdgeLoop>> group_by_owner(std::span<const EdgeLoop> loops) {
  std::map<int, std::vector<EdgeLoop>> by_owner;
  for (const auto& loop : loops) by_owner[loop.owner].push_back(loop);
  std::vector<std::vector<EdgeLoop>> groups;
  groups.reserve(by_owner.size());
  for (auto& [owner, group] : by_owner) {
    require(group.size() >= 2, "edge loops: owner " + std::to_string(owner) + " has fewer than two loops");
    for (const auto& loop : group)
      require(loop.axis == group.front().axis, "edge loops: owner " + std::to_string(owner) + " mixes axes");
    std::stable_sort(group.begin(), group.end(),
                     [](const EdgeLoop& a, const EdgeLoop& b) { return a.position() < b.position(); });
    groups.push_back(std::move(group));
  }
  return groups;
}

TriangleMesh loft_mesh(std::span<const EdgeLoop> loops) {
  TriangleMesh mesh;
  auto emit = [&mesh](int a, int b, int c) {
    const auto& pa = mesh.vertices[static_cast<std::size_t>(a)];
    if (pa == mesh.vertices[static_cast<std::size_t>(b)] && pa == mesh.vertices[static_cast<std::size_t>(c)]) return;
    mesh.triangles.push_back({a, b, c});
  };
  for (const auto& group : group_by_owner(loops)) {
    const int base = static_cast<int>(mesh.vertices.size());
    for (const auto& loop : group)
      for (const auto& corner : rectangle_corners(loop))
        mesh.vertices.push_back({double(corner[0]), double(corner[1]), double(corner[2])});
    const int rings = static_cast<int>(group.size());
    for (int j = 0; j + 1 < rings; ++j) {
      const int lower = base + 4 * j;
      const int upper = lower + 4;
      for (int k = 0; k < 4; ++k) {
        const int k1 = (k + 1) % 4;
        emit(lower + k, lower + k1, upper + k1);
        emit(lower + k, upper + k1, upper + k);
      }
    }
    // Corners run counter-clockwise about +axis: the first cap faces -axis.
    const int first = base;
    const int last = base + 4 * (rings - 1);
    emit(first, first + 2, first + 1);
    emit(first, first + 3, first + 2);
    emit(last, last + 1, last + 2);
    emit(last, last + 2, last + 3);
  }
  return mesh;
}

std::vector<Box> loft_slab_boxes(std::span<const EdgeLoop> owner_loops, int resolution, int slab_begin,
                                 int slab_end) {
  std::vector<Box> boxes;
  if (owner_loops.size() < 2) return boxes;
  const int axis = owner_loops.front().axis;
  const int b = (axis + 1) % 3;
  const int c = (axis + 2) % 3;
  const int first = owner_loops.front().position();
  const int last = owner_loops.back().position();
  const int begin = std::max({slab_begin, first, 0});
  const int end = std::min({slab_end, last, resolution});
  std::size_t j = 0;
  for (int s = begin; s < end; ++s) {
    // Bracketing pair: p_j <= s < p_{j+1}, so the center s + 1/2 is strictly inside.
    while (j + 1 < owner_loops.size() && owner_loops[j + 1].position() <= s) ++j;
    const EdgeLoop& l0 = owner_loops[j];
    const EdgeLoop& l1 = owner_loops[j + 1];
    const std::int64_t d = l1.position() - l0.position();
    const std::int64_t offset = 2 * std::int64_t{s} + 1 - 2 * std::int64_t{l0.position()};
    Box box;
    box.lo[axis] = s;
    box.hi[axis] = s + 1;
    bool empty = false;
    for (int ax : {b, c}) {
      // Twice the interpolated bound, scaled by d, is exact in integers.
      const std::int64_t lo2d = 2 * d * l0.lo[ax] + offset * (l1.lo[ax] - l0.lo[ax]);
      const std::int64_t hi2d = 2 * d * l0.hi[ax] + offset * (l1.hi[ax] - l0.hi[ax]);
      // Cell x is inside iff lo2d < (2x + 1) d < hi2d.
      const std::int64_t x_min = std::max<std::int64_t>(floor_div(lo2d - d, 2 * d) + 1, 0);
      const std::int64_t x_max = std::min<std::int64_t>(ceil_div(hi2d - d, 2 * d) - 1, resolution - 1);
      if (x_max < x_min) {
        empty = true;
        break;
      }
      box.lo[ax] = static_cast<int>(x_min);
      box.hi[ax] = static_cast<int>(x_max + 1);
    }
    if (!empty) boxes.push_back(box);
  }
  return boxes;
}

OccupancyGrid voxelize_mesh(std::span<const EdgeLoop> loops, int resolution) {
  OccupancyGrid grid(resolution);
  for (const auto& group : group_by_owner(loops))
    for (const auto& box : loft_slab_boxes(group, resolution, 0, resolution)) grid.fill_box(box);
  return grid;
}

void export_obj(const TriangleMesh& mesh, std::ostream& out) {
  out << "# primesh mesh\n";
  for (const auto& v : mesh.vertices) {
    out << "v ";
    write_number(out, v[0]);
    out << ' ';
    write_number(out, v[1]);
    out << ' ';
    write_number(out, v[2]);
    out << '\n';
  }
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!out) throw FormatError("export_obj: write failed");
}

TriangleMesh parse_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "v") {
      std::array<double, 3> p{};
      if (!(fields >> p[0] >> p[1] >> p[2])) throw FormatError("parse_obj: bad vertex on line " + std::to_string(line_no));
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::array<int, 3> t{};
      if (!(fields >> t[0] >> t[1] >> t[2])) throw FormatError("parse_obj: bad face on line " + std::to_string(line_no));
      for (auto& i : t) {
        if (i < 1 || i > static_cast<int>(mesh.vertices.size()))
          throw FormatError("parse_obj: face index out of range on line " + std::to_string(line_no));
        --i;
      }
      mesh.triangles.push_back(t);
    }
  }
  return mesh;
}

}  // namespace primesh
