#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "primesh/pipeline/pipeline.hpp"

using namespace primesh;
using primesh::testing::random_shape;

namespace {

NetworkConfig small_network() {
  NetworkConfig n;
  n.reference_pool = 16;
  n.conv_channels = {2, 2, 2};
  n.conv_kernels = {3, 3, 3};
  n.param_hidden = {8, 8};
  n.step_hidden = 4;
  n.head_hidden = {16, 8};
  return n;
}

// Random weights; delete actions get an output bias of `delete_bias`.
QNetwork<float> prim_net(float delete_bias = -100.0F, std::uint64_t seed = 1) {
  QNetwork<float> net(small_network(), prim_layout());
  net.initialize(seed);
  const auto bias = net.output_layer().bias;
  for (int a = 0; a < kPrimActionCount; ++a)
    if (decode_prim_action(a).kind == PrimActionKind::kDelete) net.parameters()[bias + a] = delete_bias;
  return net;
}

QNetwork<float> mesh_net(std::uint64_t seed = 2) {
  QNetwork<float> net(small_network(), mesh_layout());
  net.initialize(seed);
  return net;
}

RunConfig small_config() {
  RunConfig c;
  c.resolution = 16;
  c.chamfer_samples = 256;
  c.network = small_network();
  return c;
}

std::vector<Shape> shapes(int count, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<Shape> out;
  for (int i = 0; i < count; ++i) {
    Shape s = random_shape(rng, 16, 2, 4);
    s.name = "s" + std::to_string(i);
    s.category = i % 2 == 0 ? "even" : "odd";
    out.push_back(s);
  }
  return out;
}

double brute_iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  long both = 0, either = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    both += a.cells()[i] && b.cells()[i];
    either += a.cells()[i] || b.cells()[i];
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace

TEST_CASE("modelling runs both agents for their full episodes") {
  const auto prim = prim_net();
  const auto mesh = mesh_net();
  const RunConfig config = small_config();
  const Shape shape = shapes(1, 3)[0];
  const ModelResult m = model_shape(prim, mesh, shape, true, config);

  CHECK(m.prim_trace.size() == 300);
  CHECK(m.mesh_trace.size() == 100);
  REQUIRE(m.primitives.size() == kPrimCount);
  for (const auto& c : m.primitives) CHECK_FALSE(c.deleted);
  CHECK_FALSE(m.merged.empty());
  CHECK(m.dropped_primitives == std::max(0, static_cast<int>(m.merged.size()) - 5));
  CHECK(m.initial_loops == make_mesh_task(shape, m.merged).loops);
  REQUIRE(m.loops.size() == kLoopCount);
  for (const auto& l : m.loops) CHECK(l.valid(16));

  double prim_sum = 0, mesh_sum = 0;
  for (const auto& r : m.prim_trace) prim_sum += r.reward;
  for (const auto& r : m.mesh_trace) mesh_sum += r.reward;
  CHECK(m.prim_reward == doctest::Approx(prim_sum));
  CHECK(m.mesh_reward == doctest::Approx(mesh_sum));
  CHECK(m.mesh == loft_mesh(m.loops));
}

TEST_CASE("modelled quality matches an independent recount") {
  const auto prim = prim_net();
  const auto mesh = mesh_net();
  const RunConfig config = small_config();
  for (const Shape& shape : shapes(3, 8)) {
    const ModelResult m = model_shape(prim, mesh, shape, true, config);
    REQUIRE(m.iou.has_value());
    REQUIRE(m.chamfer.has_value());
    std::stringstream listing;
    write_loops(m.loops, listing);
    const auto loops = read_loops(listing);
    CHECK(loops == m.loops);
    const double expected = brute_iou(voxelize_mesh(loops, 16), *shape.target);
    CHECK(*m.iou == doctest::Approx(expected).epsilon(1e-12));
    CHECK(*m.iou >= 0.0);
    CHECK(*m.iou <= 1.0);
    CHECK((std::isnan(*m.chamfer) || *m.chamfer >= 0.0));
    // Rebuild the loops from the exported OBJ: each owner contributes four
    // corners per loop, in group order; owner and axis come from the listing.
    std::stringstream obj;
    export_obj(m.mesh, obj);
    const TriangleMesh parsed = parse_obj(obj);
    std::vector<EdgeLoop> from_obj;
    std::size_t v = 0;
    for (const auto& group : group_by_owner(loops))
      for (const auto& listed : group) {
        EdgeLoop l = listed;
        for (int a = 0; a < 3; ++a) {
          double lo = parsed.vertices[v][a], hi = lo;
          for (std::size_t k = 1; k < 4; ++k) {
            lo = std::min(lo, parsed.vertices[v + k][a]);
            hi = std::max(hi, parsed.vertices[v + k][a]);
          }
          l.lo[a] = static_cast<int>(std::lround(lo));
          l.hi[a] = static_cast<int>(std::lround(hi));
        }
        from_obj.push_back(l);
        v += 4;
      }
    REQUIRE(v == parsed.vertices.size());
    CHECK(*m.iou == doctest::Approx(brute_iou(voxelize_mesh(from_obj, 16), *shape.target)).epsilon(1e-12));
    // The final mesh-environment step reports the same IoU.
    CHECK(m.mesh_trace.back().iou == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("modelled meshes export as closed OBJ surfaces") {
  const ModelResult m = model_shape(prim_net(), mesh_net(), shapes(1, 4)[0], true, small_config());
  std::stringstream obj;
  export_obj(m.mesh, obj);
  const TriangleMesh back = parse_obj(obj);
  REQUIRE(back.vertices.size() == m.mesh.vertices.size());
  CHECK(back.triangles == m.mesh.triangles);
  for (std::size_t i = 0; i < back.vertices.size(); ++i)
    for (int a = 0; a < 3; ++a) CHECK(back.vertices[i][a] == doctest::Approx(m.mesh.vertices[i][a]));

  // Within each owner's loft, coincident corners weld into one vertex; every
  // welded edge is then traversed equally often in both directions.
  std::vector<int> weld(back.vertices.size());
  std::size_t base = 0;
  for (const auto& group : group_by_owner(m.loops)) {
    const std::size_t end = base + 4 * group.size();
    for (std::size_t i = base; i < end; ++i) {
      std::size_t j = base;
      while (back.vertices[j] != back.vertices[i]) ++j;
      weld[i] = static_cast<int>(j);
    }
    base = end;
  }
  REQUIRE(base == back.vertices.size());
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : back.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = weld[static_cast<std::size_t>(t[k])], b = weld[static_cast<std::size_t>(t[(k + 1) % 3])];
      if (a != b) ++directed[{a, b}];
    }
  CHECK_FALSE(directed.empty());
  for (const auto& [edge, n] : directed) {
    const auto reverse = directed.find({edge.second, edge.first});
    REQUIRE(reverse != directed.end());
    CHECK(reverse->second == n);
  }
}

TEST_CASE("modelling without a target keeps the policy's actions") {
  const auto prim = prim_net();
  const auto mesh = mesh_net();
  const RunConfig config = small_config();
  const Shape shape = shapes(1, 5)[0];
  Shape blind = shape;
  blind.target = std::make_shared<OccupancyGrid>(16);
  const ModelResult with = model_shape(prim, mesh, shape, true, config);
  const ModelResult without = model_shape(prim, mesh, blind, false, config);
  CHECK_FALSE(without.iou.has_value());
  CHECK_FALSE(without.chamfer.has_value());
  REQUIRE(without.prim_trace.size() == with.prim_trace.size());
  for (std::size_t i = 0; i < with.prim_trace.size(); ++i) CHECK(without.prim_trace[i].action == with.prim_trace[i].action);
  CHECK(without.loops == with.loops);
}

TEST_CASE("modelling is deterministic") {
  const RunConfig config = small_config();
  const Shape shape = shapes(1, 6)[0];
  const ModelResult a = model_shape(prim_net(), mesh_net(), shape, true, config);
  const ModelResult b = model_shape(prim_net(), mesh_net(), shape, true, config);
  CHECK(a.loops == b.loops);
  CHECK(a.mesh == b.mesh);
  CHECK(*a.iou == *b.iou);
}

TEST_CASE("modelling preconditions") {
  const RunConfig config = small_config();
  const Shape shape = shapes(1, 7)[0];
  CHECK_THROWS_AS(model_shape(mesh_net(), mesh_net(), shape, true, config), ContractViolation);
  CHECK_THROWS_AS(model_shape(prim_net(), prim_net(), shape, true, config), ContractViolation);
  CHECK_THROWS_WITH_AS(model_shape(prim_net(100.0F), mesh_net(), shape, true, config),
                       doctest::Contains("deleted every primitive"), ContractViolation);
}

TEST_CASE("geometry listings round trip and reject malformed lines") {
  std::mt19937 rng(9);
  std::vector<Cuboid> cuboids;
  for (int i = 0; i < 6; ++i) {
    Cuboid c = primesh::testing::random_cuboid(rng, 16);
    c.deleted = i % 3 == 0;
    cuboids.push_back(c);
  }
  std::stringstream text;
  write_primitives(cuboids, text);
  const auto back = read_primitives(text);
  REQUIRE(back.size() == cuboids.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].v == cuboids[i].v);
    CHECK(back[i].v_prime == cuboids[i].v_prime);
    CHECK(back[i].deleted == cuboids[i].deleted);
  }

  auto rejects_primitives = [](const char* s) {
    std::istringstream in(s);
    CHECK_THROWS_AS(read_primitives(in), FormatError);
  };
  rejects_primitives("0 0 0 1 1 1\n");
  rejects_primitives("0 0 0 1 1 1 2\n");
  rejects_primitives("2 0 0 1 1 1 0\n");
  rejects_primitives("0 0 0 1 1 1 0 9\n");
  auto rejects_loops = [](const char* s) {
    std::istringstream in(s);
    CHECK_THROWS_AS(read_loops(in), FormatError);
  };
  rejects_loops("0 3 0 0 0 1 1 0\n");
  rejects_loops("0 2 0 0 0 1 1 1\n");
  rejects_loops("0 2 0 0 x 1 1 0\n");
  std::istringstream blank("\n  \n");
  CHECK(read_loops(blank).empty());
}

TEST_CASE("agent evaluation summarizes both agents per category") {
  const auto prim = prim_net();
  const auto mesh = mesh_net();
  const RunConfig config = small_config();
  const auto set = shapes(4, 12);
  CHECK_THROWS_AS(evaluate_agents(prim, mesh, std::span<const Shape>{}, config), ContractViolation);

  const auto rows = evaluate_agents(prim, mesh, set, config);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].scheme == "prim");
  CHECK(rows[0].category == "even");
  CHECK(rows[1].category == "odd");
  CHECK(rows[2].scheme == "mesh");
  CHECK(rows[2].shapes == 2);

  double even_iou = 0, even_prim_iou = 0;
  for (int i : {0, 2}) {
    const ModelResult m = model_shape(prim, mesh, set[i], true, config);
    even_iou += *m.iou / 2;
    even_prim_iou += brute_iou(voxelize_cuboids(m.primitives, 16), *set[i].target) / 2;
  }
  CHECK(rows[2].iou == doctest::Approx(even_iou));
  CHECK(rows[0].iou == doctest::Approx(even_prim_iou));
}
