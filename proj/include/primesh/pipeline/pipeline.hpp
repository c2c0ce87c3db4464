#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "primesh/config/config.hpp"
#include "primesh/geometry/mesh.hpp"

namespace primesh {

/// Output of the two-step modelling pipeline for one reference.
struct ModelResult {
  std::vector<Cuboid> primitives;  // Prim-Agent's final 27 cuboids
  std::vector<Cuboid> merged;      // after merging, deleted ones dropped
  int dropped_primitives = 0;      // merged primitives beyond the five largest
  std::vector<EdgeLoop> initial_loops;
  std::vector<EdgeLoop> loops;     // Mesh-Agent's final loops
  TriangleMesh mesh;
  std::vector<PrimTraceRecord> prim_trace;
  std::vector<MeshTraceRecord> mesh_trace;
  double prim_reward = 0.0;
  double mesh_reward = 0.0;
  // Quality against the target; absent when modelling from a reference alone.
  std::optional<double> iou;
  std::optional<double> chamfer;
};

/// Greedy Prim-Agent episode, merge, loop assignment (capped at the five
/// largest primitives), greedy Mesh-Agent episode and lofting. Without a
/// target the environments score against an empty grid, so trace rewards
/// carry no meaning; the actions do not depend on them.
ModelResult model_shape(const QNetwork<float>& prim_net, const QNetwork<float>& mesh_net, const Shape& shape,
                        bool has_target, const RunConfig& config);

// Plain-text geometry listings, one item per line:
//   primitives: "x y z x' y' z' deleted"
//   loops:      "owner axis lo_x lo_y lo_z hi_x hi_y hi_z"
void write_primitives(std::span<const Cuboid> cuboids, std::ostream& out);
std::vector<Cuboid> read_primitives(std::istream& in);
void write_loops(std::span<const EdgeLoop> loops, std::ostream& out);
std::vector<EdgeLoop> read_loops(std::istream& in);

/// Checks that a checkpoint fits an agent's input layout.
void require_layout(const QNetwork<float>& net, const InputLayout& expected, const std::string& what);

/// Per-category metrics of both agents over a dataset (modes "prim" and
/// "mesh"). Throws ContractViolation for an empty dataset.
std::vector<MetricsRow> evaluate_agents(const QNetwork<float>& prim_net, const QNetwork<float>& mesh_net,
                                        std::span<const Shape> shapes, const RunConfig& config);

}  // namespace primesh
