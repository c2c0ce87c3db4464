#include "primesh/pipeline/pipeline.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "primesh/geometry/chamfer.hpp"

namespace primesh {

void write_primitives(std::span<const Cuboid> cuboids, std::ostream& out) {
  for (const auto& c : cuboids)
    out << c.v[0] << ' ' << c.v[1] << ' ' << c.v[2] << ' ' << c.v_prime[0] << ' ' << c.v_prime[1] << ' '
        << c.v_prime[2] << ' ' << (c.deleted ? 1 : 0) << '\n';
}

namespace {

template <class Parse>
void for_each_line(std::istream& in, const char* what, Parse parse) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string extra;
    if (!parse(fields) || (fields >> extra))
      throw FormatError(std::string(what) + " line " + std::to_string(line_no) + ": malformed entry");
  }
}

}  // namespace

std::vector<Cuboid> read_primitives(std::istream& in) {
  std::vector<Cuboid> out;
  for_each_line(in, "primitives", [&out](std::istringstream& f) {
    Cuboid c;
    int deleted = 0;
    if (!(f >> c.v[0] >> c.v[1] >> c.v[2] >> c.v_prime[0] >> c.v_prime[1] >> c.v_prime[2] >> deleted)) return false;
    if (deleted != 0 && deleted != 1) return false;
    for (int a = 0; a < 3; ++a)
      if (c.v[a] > c.v_prime[a]) return false;
    c.deleted = deleted == 1;
    out.push_back(c);
    return true;
  });
  return out;
}

void write_loops(std::span<const EdgeLoop> loops, std::ostream& out) {
  for (const auto& l : loops)
    out << l.owner << ' ' << l.axis << ' ' << l.lo[0] << ' ' << l.lo[1] << ' ' << l.lo[2] << ' ' << l.hi[0] << ' '
        << l.hi[1] << ' ' << l.hi[2] << '\n';
}

std::vector<EdgeLoop> read_loops(std::istream& in) {
  std::vector<EdgeLoop> out;
  for_each_line(in, "loops", [&out](std::istringstream& f) {
    EdgeLoop l;
    if (!(f >> l.owner >> l.axis >> l.lo[0] >> l.lo[1] >> l.lo[2] >> l.hi[0] >> l.hi[1] >> l.hi[2])) return false;
    if (l.axis < 0 || l.axis > 2 || l.lo[l.axis] != l.hi[l.axis]) return false;
    out.push_back(l);
    return true;
  });
  return out;
}

void require_layout(const QNetwork<float>& net, const InputLayout& expected, const std::string& what) {
  const InputLayout& got = net.layout();
  if (got == expected) return;
  throw ContractViolation(what + " checkpoint expects " + std::to_string(got.param_features) + " parameter features, " +
                          std::to_string(got.step_features) + " steps and " + std::to_string(got.actions) +
                          " actions; the configuration needs " + std::to_string(expected.param_features) + ", " +
                          std::to_string(expected.step_features) + " and " + std::to_string(expected.actions));
}

ModelResult model_shape(const QNetwork<float>& prim_net, const QNetwork<float>& mesh_net, const Shape& shape,
                        bool has_target, const RunConfig& config) {
  require_layout(prim_net, prim_layout(config.prim.episode_steps), "Prim-Agent");
  require_layout(mesh_net, mesh_layout(config.mesh.episode_steps), "Mesh-Agent");
  ModelResult out;
  PrimEnv prim(config.prim);
  out.prim_reward = run_policy(prim_net, prim, shape, &out.prim_trace).accumulated_reward;
  out.primitives.assign(prim.state().cuboids.begin(), prim.state().cuboids.end());
  out.merged = merge_primitives(out.primitives);
  if (out.merged.empty()) throw ContractViolation("model: the Prim-Agent deleted every primitive; no loops can be assigned");
  out.dropped_primitives = std::max(0, static_cast<int>(out.merged.size()) - kLoopCount / 2);

  const MeshTask task = make_mesh_task(shape, out.merged);
  out.initial_loops = task.loops;
  MeshEnv mesh(config.mesh);
  out.mesh_reward = run_policy(mesh_net, mesh, task, &out.mesh_trace).accumulated_reward;
  out.loops.assign(mesh.state().loops.begin(), mesh.state().loops.end());
  out.mesh = loft_mesh(out.loops);
  if (has_target) {
    const OccupancyGrid solid = voxelize_mesh(out.loops, shape.resolution());
    out.iou = iou(solid, *shape.target);
    out.chamfer = (solid.count() == 0 || shape.target->count() == 0)
                      ? std::nan("")
                      : chamfer_distance(solid, *shape.target, static_cast<std::size_t>(config.chamfer_samples));
  }
  return out;
}

std::vector<MetricsRow> evaluate_agents(const QNetwork<float>& prim_net, const QNetwork<float>& mesh_net,
                                        std::span<const Shape> shapes, const RunConfig& config) {
  require(!shapes.empty(), "eval: the dataset has no shapes");
  std::vector<EpisodeResult> prim_results, mesh_results;
  for (const auto& shape : shapes) {
    const ModelResult m = model_shape(prim_net, mesh_net, shape, true, config);
    EpisodeResult p;
    p.accumulated_reward = m.prim_reward;
    const OccupancyGrid prim_solid = voxelize_cuboids(m.primitives, shape.resolution());
    p.iou = iou(prim_solid, *shape.target);
    p.chamfer = prim_solid.count() == 0
                    ? std::nan("")
                    : chamfer_distance(prim_solid, *shape.target, static_cast<std::size_t>(config.chamfer_samples));
    prim_results.push_back(p);
    mesh_results.push_back({m.mesh_reward, *m.iou, *m.chamfer, {}});
  }
  auto rows = summarize("prim", shapes, prim_results);
  auto mesh_rows = summarize("mesh", shapes, mesh_results);
  rows.insert(rows.end(), mesh_rows.begin(), mesh_rows.end());
  return rows;
}

}  // namespace primesh
