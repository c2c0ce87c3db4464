#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "primesh/geometry/chamfer.hpp"
#include "primesh/geometry/cuboid.hpp"
#include "primesh/geometry/depth.hpp"
#include "primesh/geometry/mesh.hpp"
#include "primesh/geometry/voxg.hpp"

using namespace primesh;

namespace {

// Brute-force cell inclusion: scan every cell against every live cuboid.
std::size_t brute_force_count(const std::vector<Cuboid>& cuboids, int r) {
  std::size_t n = 0;
  for (int z = 0; z < r; ++z)
    for (int y = 0; y < r; ++y)
      for (int x = 0; x < r; ++x)
        for (const auto& c : cuboids)
          if (!c.deleted && c.box().contains_cell(x, y, z)) {
            ++n;
            break;
          }
  return n;
}

Cuboid random_cuboid(std::mt19937& rng, int r) {
  std::uniform_int_distribution<int> coord(0, r - 1);
  Cuboid c;
  for (int a = 0; a < 3; ++a) {
    int p = coord(rng);
    int q = coord(rng);
    if (p > q) std::swap(p, q);
    c.v[a] = p;
    c.v_prime[a] = q + 1;
  }
  return c;
}

// Oracle for render_depth: march each pixel's ray through the voxel grid.
float ray_march(const OccupancyGrid& g, int row, int col) {
  const int r = g.resolution();
  const double px = (col + 0.5) / DepthMap::kSize * r;
  const double py = r - (row + 0.5) / DepthMap::kSize * r;
  const int x = static_cast<int>(std::floor(px));
  const int y = static_cast<int>(std::floor(py));
  for (double z = r - 0.5; z > 0.0; z -= 1.0) {
    const int zi = static_cast<int>(std::floor(z));
    if (g.at(x, y, zi)) return static_cast<float>(zi + 1) / static_cast<float>(r);
  }
  return 0.0F;
}

double brute_chamfer(const std::vector<Point3>& a, const std::vector<Point3>& b, int r) {
  auto one_way = [](const std::vector<Point3>& p, const std::vector<Point3>& q) {
    double sum = 0.0;
    for (const auto& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : q) {
        const double d = std::hypot(x[0] - y[0], x[1] - y[1], x[2] - y[2]);
        best = std::min(best, d);
      }
      sum += best;
    }
    return sum / static_cast<double>(p.size());
  };
  return (one_way(a, b) + one_way(b, a)) / r;
}

EdgeLoop make_loop(int axis, int position, Vec3i lo, Vec3i hi, int owner = 0) {
  lo[axis] = position;
  hi[axis] = position;
  return EdgeLoop{axis, lo, hi, owner};
}

// Counts, per undirected edge, how many triangles use it.
std::map<std::pair<int, int>, int> edge_use(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      int a = t[k];
      int b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++uses[{a, b}];
    }
  return uses;
}

}  // namespace

TEST_CASE("box subtraction covers exactly the difference") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Box a = random_cuboid(rng, 8).box();
    const Box b = random_cuboid(rng, 8).box();
    const auto pieces = subtract(a, b);
    REQUIRE(pieces.size() <= 6);
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          const int hits = static_cast<int>(std::count_if(pieces.begin(), pieces.end(),
                                                          [&](const Box& p) { return p.contains_cell(x, y, z); }));
          const bool expected = a.contains_cell(x, y, z) && !b.contains_cell(x, y, z);
          CHECK(hits == (expected ? 1 : 0));
        }
  }
}

TEST_CASE("voxelize_cuboids") {
  SUBCASE("full box") {
    const std::vector<Cuboid> c{{{0, 0, 0}, {4, 4, 4}, false}};
    CHECK(voxelize_cuboids(c, 4).count() == 64);
  }
  SUBCASE("all deleted") {
    const std::vector<Cuboid> c{{{0, 0, 0}, {4, 4, 4}, true}, {{1, 1, 1}, {2, 2, 2}, true}};
    CHECK(voxelize_cuboids(c, 4).count() == 0);
    CHECK(voxelize_cuboids({}, 4).count() == 0);
  }
  SUBCASE("overlapping pair matches brute force") {
    const std::vector<Cuboid> c{{{0, 0, 0}, {2, 2, 2}, false}, {{1, 0, 0}, {3, 2, 2}, false}};
    CHECK(brute_force_count(c, 4) == 12);
    CHECK(voxelize_cuboids(c, 4).count() == 12);
  }
  SUBCASE("random sets match brute force") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<Cuboid> c;
      for (int i = 0; i < 4; ++i) c.push_back(random_cuboid(rng, 10));
      c[1].deleted = trial % 2 == 0;
      CHECK(voxelize_cuboids(c, 10).count() == brute_force_count(c, 10));
    }
  }
}

TEST_CASE("iou") {
  OccupancyGrid a(4);
  OccupancyGrid b(4);
  a.fill_box({{0, 0, 0}, {2, 2, 2}});
  b.fill_box({{1, 0, 0}, {3, 2, 2}});
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(iou(a, b) == iou(b, a));
  OccupancyGrid c(4);
  c.fill_box({{3, 3, 3}, {4, 4, 4}});
  CHECK(iou(a, c) == 0.0);
  CHECK(iou(OccupancyGrid(4), OccupancyGrid(4)) == 0.0);
  CHECK_THROWS_AS(iou(a, OccupancyGrid(5)), ContractViolation);
}

TEST_CASE("per_primitive_iou by rasterization and by volume table agree") {
  OccupancyGrid target(4);
  target.fill_box({{0, 0, 0}, {4, 4, 4}});
  const VolumeTable table(target);
  const Cuboid p{{0, 0, 0}, {2, 2, 2}, false};
  CHECK(per_primitive_iou(p, target) == doctest::Approx(0.125));
  CHECK(per_primitive_iou(p, table) == doctest::Approx(0.125));
  CHECK(per_primitive_iou(Cuboid{{0, 0, 0}, {4, 4, 4}, false}, target) == 1.0);

  OccupancyGrid small(4);
  small.fill_box({{0, 0, 0}, {1, 1, 1}});
  CHECK(per_primitive_iou(Cuboid{{2, 2, 2}, {4, 4, 4}, false}, small) == 0.0);
  CHECK_THROWS_AS(per_primitive_iou(Cuboid{{0, 0, 0}, {1, 1, 1}, true}, target), ContractViolation);

  std::mt19937 rng(11);
  OccupancyGrid blob(12);
  for (int i = 0; i < 3; ++i) blob.fill_box(random_cuboid(rng, 12).box());
  const VolumeTable blob_table(blob);
  for (int trial = 0; trial < 50; ++trial) {
    const Cuboid c = random_cuboid(rng, 12);
    CHECK(per_primitive_iou(c, blob_table) == doctest::Approx(per_primitive_iou(c, blob)).epsilon(1e-14));
  }
}

TEST_CASE("coverage grid tallies track full recomputation") {
  std::mt19937 rng(5);
  const int r = 12;
  OccupancyGrid target(r);
  target.fill_box({{2, 2, 2}, {9, 7, 11}});
  std::vector<Cuboid> cuboids;
  CoverageGrid cov(target);
  for (int i = 0; i < 5; ++i) {
    cuboids.push_back(random_cuboid(rng, r));
    cov.add(cuboids.back().box());
  }
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t i = rng() % cuboids.size();
    const Cuboid next = random_cuboid(rng, r);
    const auto preview = cov.preview_replace(cuboids[i].box(), next.box());
    cov.replace(cuboids[i].box(), next.box());
    cuboids[i] = next;
    CHECK(preview.covered == cov.tally().covered);
    CHECK(preview.intersection == cov.tally().intersection);
    const auto grid = voxelize_cuboids(cuboids, r);
    CHECK(cov.occupancy() == grid);
    CHECK(cov.iou() == doctest::Approx(iou(grid, target)).epsilon(1e-15));
  }
}

TEST_CASE("render_depth") {
  SUBCASE("empty grid") {
    const auto map = render_depth(OccupancyGrid(32));
    CHECK(std::all_of(map.values().begin(), map.values().end(), [](float v) { return v == 0.0F; }));
  }
  SUBCASE("full grid is constant and nonzero") {
    OccupancyGrid g(32);
    g.fill_box({{0, 0, 0}, {32, 32, 32}});
    const auto map = render_depth(g);
    CHECK(std::all_of(map.values().begin(), map.values().end(), [](float v) { return v == 1.0F; }));
  }
  SUBCASE("half spaces match a ray marcher") {
    for (int axis = 0; axis < 3; ++axis) {
      OccupancyGrid g(32);
      Box half{{0, 0, 0}, {32, 32, 32}};
      half.hi[axis] = 16;
      g.fill_box(half);
      const auto map = render_depth(g);
      std::set<float> levels;
      for (int row = 0; row < DepthMap::kSize; ++row)
        for (int col = 0; col < DepthMap::kSize; ++col) {
          CHECK(map.at(row, col) == ray_march(g, row, col));
          levels.insert(map.at(row, col));
        }
      // Splitting across the view direction gives hit/miss halves; along it, one level.
      CHECK(levels.size() == (axis == 2 ? 1U : 2U));
    }
  }
  SUBCASE("random boxes at odd resolution match a ray marcher") {
    std::mt19937 rng(9);
    OccupancyGrid g(24);
    for (int i = 0; i < 4; ++i) g.fill_box(random_cuboid(rng, 24).box());
    const auto map = render_depth(g);
    for (int row = 0; row < DepthMap::kSize; ++row)
      for (int col = 0; col < DepthMap::kSize; ++col) CHECK(map.at(row, col) == ray_march(g, row, col));
  }
  CHECK_THROWS_AS(render_depth(OccupancyGrid(129)), ContractViolation);
}

TEST_CASE("pfm round trip") {
  OccupancyGrid g(16);
  g.fill_box({{2, 3, 1}, {9, 12, 7}});
  const auto map = render_depth(g);
  std::stringstream buf;
  write_pfm(map, buf);
  CHECK(buf.str().rfind("Pf\n128 128\n-1.0\n", 0) == 0);
  CHECK(read_pfm(buf) == map);
}

TEST_CASE("loft_mesh") {
  SUBCASE("two identical loops give a closed box") {
    const std::vector<EdgeLoop> loops{make_loop(0, 0, {0, 0, 0}, {0, 4, 4}), make_loop(0, 4, {0, 0, 0}, {0, 4, 4})};
    const auto mesh = loft_mesh(loops);
    CHECK(mesh.vertices.size() == 8);
    CHECK(mesh.triangles.size() == 12);
    for (const auto& [edge, uses] : edge_use(mesh)) CHECK(uses == 2);
  }
  SUBCASE("three collinear loops keep the outer surface") {
    const std::vector<EdgeLoop> loops{make_loop(2, 0, {1, 1, 0}, {3, 3, 0}), make_loop(2, 2, {1, 1, 0}, {3, 3, 0}),
                                      make_loop(2, 5, {1, 1, 0}, {3, 3, 0})};
    const auto mesh = loft_mesh(loops);
    CHECK(mesh.vertices.size() == 12);
    // Two lofted pairs of four quads each plus two two-triangle caps.
    CHECK(mesh.triangles.size() == 16 + 4);
    for (const auto& [edge, uses] : edge_use(mesh)) CHECK(uses == 2);
    for (const auto& v : mesh.vertices) {
      CHECK((v[0] == 1.0 || v[0] == 3.0));
      CHECK((v[1] == 1.0 || v[1] == 3.0));
    }
  }
  SUBCASE("frustum vertices lie on the two rectangles") {
    const EdgeLoop base = make_loop(1, 0, {0, 0, 0}, {8, 0, 8});
    const EdgeLoop top = make_loop(1, 6, {2, 0, 2}, {6, 0, 6});
    const std::vector<EdgeLoop> loops{top, base};
    const auto mesh = loft_mesh(loops);
    for (const auto& v : mesh.vertices) {
      const bool on_base = v[1] == 0.0 && (v[0] == 0.0 || v[0] == 8.0) && (v[2] == 0.0 || v[2] == 8.0);
      const bool on_top = v[1] == 6.0 && (v[0] == 2.0 || v[0] == 6.0) && (v[2] == 2.0 || v[2] == 6.0);
      CHECK((on_base || on_top));
    }
    for (const auto& [edge, uses] : edge_use(mesh)) CHECK(uses == 2);
  }
  SUBCASE("owners are meshed independently") {
    const std::vector<EdgeLoop> loops{make_loop(0, 0, {0, 0, 0}, {0, 2, 2}, 0), make_loop(0, 2, {0, 0, 0}, {0, 2, 2}, 0),
                                      make_loop(2, 4, {4, 4, 0}, {6, 6, 0}, 1), make_loop(2, 8, {4, 4, 0}, {6, 6, 0}, 1)};
    const auto mesh = loft_mesh(loops);
    CHECK(mesh.vertices.size() == 16);
    CHECK(mesh.triangles.size() == 24);
  }
  SUBCASE("an owner with a single loop is rejected") {
    const std::vector<EdgeLoop> loops{make_loop(0, 0, {0, 0, 0}, {0, 2, 2})};
    CHECK_THROWS_AS(loft_mesh(loops), ContractViolation);
    CHECK_THROWS_AS(voxelize_mesh(loops, 8), ContractViolation);
  }
}

TEST_CASE("voxelize_mesh") {
  SUBCASE("boundary loops of a box reproduce the cuboid rasterizer") {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 40; ++trial) {
      const Cuboid c = random_cuboid(rng, 16);
      for (int axis = 0; axis < 3; ++axis) {
        const std::vector<EdgeLoop> loops{make_loop(axis, c.v[axis], c.v, c.v_prime),
                                          make_loop(axis, c.v_prime[axis], c.v, c.v_prime)};
        const std::vector<Cuboid> one{c};
        CHECK(voxelize_mesh(loops, 16) == voxelize_cuboids(one, 16));
      }
    }
  }
  SUBCASE("zero-area loops are empty") {
    const std::vector<EdgeLoop> loops{make_loop(0, 1, {0, 3, 3}, {0, 3, 3}), make_loop(0, 7, {0, 3, 3}, {0, 3, 3})};
    CHECK(voxelize_mesh(loops, 8).count() == 0);
  }
  SUBCASE("frustum matches a slab-wise rectangle oracle and shrinks monotonically") {
    const int r = 32;
    const EdgeLoop base = make_loop(2, 2, {2, 4, 0}, {30, 28, 0});
    const EdgeLoop top = make_loop(2, 27, {11, 13, 0}, {20, 18, 0});
    const std::vector<EdgeLoop> loops{base, top};
    const auto grid = voxelize_mesh(loops, r);
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (int z = 0; z < r; ++z) {
      std::size_t expected = 0;
      const double c = z + 0.5;
      if (c > 2 && c < 27) {
        const double t = (c - 2) / 25.0;
        const double x0 = 2 + t * 9;
        const double x1 = 30 - t * 10;
        const double y0 = 4 + t * 9;
        const double y1 = 28 - t * 10;
        for (int y = 0; y < r; ++y)
          for (int x = 0; x < r; ++x)
            if (x + 0.5 > x0 && x + 0.5 < x1 && y + 0.5 > y0 && y + 0.5 < y1) ++expected;
      }
      std::size_t actual = 0;
      for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) actual += grid.at(x, y, z) ? 1 : 0;
      CHECK(actual == expected);
      if (z >= 2 && z < 27) {
        CHECK(actual <= previous);
        previous = actual;
      }
    }
  }
}

TEST_CASE("obj export") {
  SUBCASE("empty mesh writes only the header") {
    std::ostringstream out;
    export_obj(TriangleMesh{}, out);
    CHECK(out.str() == "# primesh mesh\n");
  }
  SUBCASE("box mesh lines and round trip") {
    const std::vector<EdgeLoop> loops{make_loop(0, 0, {0, 0, 0}, {0, 4, 4}), make_loop(0, 4, {0, 0, 0}, {0, 4, 4})};
    TriangleMesh mesh = loft_mesh(loops);
    mesh.vertices[0][1] = 0.1;  // a non-integer coordinate must survive too
    std::stringstream buf;
    export_obj(mesh, buf);
    const std::string text = buf.str();
    int v_lines = 0;
    int f_lines = 0;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
      v_lines += line.rfind("v ", 0) == 0 ? 1 : 0;
      f_lines += line.rfind("f ", 0) == 0 ? 1 : 0;
    }
    CHECK(v_lines == 8);
    CHECK(f_lines == 12);
    CHECK(parse_obj(buf) == mesh);
  }
  SUBCASE("bad face index is rejected") {
    std::istringstream in("v 0 0 0\nf 1 2 3\n");
    CHECK_THROWS_AS(parse_obj(in), FormatError);
  }
}

TEST_CASE("chamfer distance") {
  const std::vector<Point3> a{{0, 0, 0}, {1, 2, 3}};
  CHECK(chamfer_distance(a, a, 32) == 0.0);
  const std::vector<Point3> p{{0, 0, 0}};
  const std::vector<Point3> q{{3, 4, 0}};
  CHECK(chamfer_distance(p, q, 10) == doctest::Approx(2 * 5.0 / 10));
  CHECK_THROWS_AS(chamfer_distance(std::vector<Point3>{}, a, 32), ContractViolation);

  SUBCASE("offset boxes match brute force nearest neighbour") {
    OccupancyGrid g1(32);
    OccupancyGrid g2(32);
    g1.fill_box({{4, 4, 4}, {12, 12, 12}});
    g2.fill_box({{5, 4, 4}, {13, 12, 12}});
    const auto pa = sample_surface_points(g1, 2048, 1);
    const auto pb = sample_surface_points(g2, 2048, 2);
    REQUIRE(pa.size() == 2048);
    CHECK(chamfer_distance(pa, pb, 32) == doctest::Approx(brute_chamfer(pa, pb, 32)).epsilon(1e-12));
  }
  SUBCASE("samples lie on exposed faces") {
    OccupancyGrid g(8);
    g.fill_box({{1, 2, 3}, {5, 6, 7}});
    for (const auto& pt : sample_surface_points(g, 500, 4)) {
      int on_face = 0;
      for (int axis = 0; axis < 3; ++axis) {
        const double lo = axis == 0 ? 1 : axis == 1 ? 2 : 3;
        const double hi = lo + 4;
        CHECK(pt[axis] >= lo);
        CHECK(pt[axis] <= hi);
        on_face += (pt[axis] == lo || pt[axis] == hi) ? 1 : 0;
      }
      CHECK(on_face >= 1);
    }
  }
  SUBCASE("translation changes the distance by at most 2|t|/R") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 16);
    std::vector<Point3> x(200);
    std::vector<Point3> y(150);
    for (auto& pt : x) pt = {u(rng), u(rng), u(rng)};
    for (auto& pt : y) pt = {u(rng), u(rng), u(rng)};
    const double base = chamfer_distance(x, y, 16);
    const Point3 t{0.7, -1.1, 0.4};
    auto moved = y;
    for (auto& pt : moved)
      for (int i = 0; i < 3; ++i) pt[i] += t[i];
    const double norm = std::hypot(t[0], t[1], t[2]);
    CHECK(std::abs(chamfer_distance(x, moved, 16) - base) <= 2 * norm / 16 + 1e-12);
  }
}

TEST_CASE("voxg io") {
  OccupancyGrid g(6);
  g.fill_box({{1, 0, 2}, {4, 5, 6}});
  std::stringstream buf;
  write_voxg(g, buf);
  const std::string bytes = buf.str();
  REQUIRE(bytes.size() == 16 + 216);
  CHECK(bytes.substr(0, 4) == "VOXG");
  CHECK(static_cast<unsigned char>(bytes[4]) == 6);
  CHECK(bytes[1 * 1 + 16 + 6 * (0 + 6 * 2)] == 1);  // cell (1,0,2), x-fastest
  CHECK(read_voxg(buf) == g);

  std::string corrupt = bytes;
  corrupt[0] = 'X';
  std::istringstream bad(corrupt);
  CHECK_THROWS_AS(read_voxg(bad), FormatError);
  std::istringstream truncated(bytes.substr(0, 40));
  CHECK_THROWS_AS(read_voxg(truncated), FormatError);
}
