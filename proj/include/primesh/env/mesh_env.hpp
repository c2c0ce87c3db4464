#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <vector>

#include "primesh/env/observation.hpp"
#include "primesh/env/shape.hpp"
#include "primesh/geometry/cuboid.hpp"
#include "primesh/geometry/mesh.hpp"

namespace primesh {

inline constexpr int kLoopCount = 10;
inline constexpr int kMeshActionsPerLoop = 36;
inline constexpr int kMeshActionCount = kLoopCount * kMeshActionsPerLoop;  // 360
inline constexpr int kMeshEpisodeSteps = 100;
inline constexpr std::array<int, 6> kMeshAmounts{-3, -2, -1, 1, 2, 3};

/// Decoded Mesh-Agent action: drag corner 0 (V_L) or 1 (V_L') of a loop.
struct MeshAction {
  int loop = 0;
  int corner = 0;
  int axis = 0;
  int amount = -3;

  friend bool operator==(const MeshAction&, const MeshAction&) = default;
};

// Layout: index = loop * 36 + corner * 18 + axis * 6 + amount rank.
MeshAction decode_mesh_action(int index);
int encode_mesh_action(const MeshAction& action);

/// Splits `loop_count` loops over the live cuboids (input order) in
/// proportion to volume, at least two each, the last cuboid taking the
/// remainder. Loops sit on each cuboid's longest axis (ties x, y, z),
/// evenly spaced with the first and last on the boundary faces, and start
/// as the cuboid's cross-section. Owner ids index the live cuboids.
/// Throws ContractViolation when loop_count < 2 * live count or no cuboid is live.
std::vector<EdgeLoop> assign_edge_loops(std::span<const Cuboid> cuboids, int loop_count = kLoopCount);

/// Per-cuboid loop counts used by assign_edge_loops.
std::vector<int> loop_allocation(std::span<const Cuboid> live, int loop_count);

/// The `max_count` largest live cuboids, in their original relative order.
/// Lets callers respect the two-loops-per-primitive minimum.
std::vector<Cuboid> largest_primitives(std::span<const Cuboid> cuboids, int max_count);

/// Stable sort by (owner, position along the owner's axis).
std::vector<EdgeLoop> canonical_sort(std::span<const EdgeLoop> loops);

struct MeshConfig {
  int episode_steps = kMeshEpisodeSteps;
};

struct MeshState {
  std::shared_ptr<const DepthMap> reference;
  std::shared_ptr<const OccupancyGrid> target;
  std::array<EdgeLoop, kLoopCount> loops{};
  int step = 0;
};

/// Starting point for a Mesh-Agent episode: a shape and its loops.
struct MeshTask {
  Shape shape;
  std::vector<EdgeLoop> loops;
};

MeshTask make_mesh_task(const Shape& shape, std::span<const Cuboid> primitives);

/// Mesh-Agent environment. The reward is the step-to-step change in IoU of
/// the lofted solid against the target; only the slabs between an edited
/// loop's neighbours are re-rasterized.
class MeshEnv {
 public:
  static constexpr int kActionCount = kMeshActionCount;
  using Task = MeshTask;

  explicit MeshEnv(MeshConfig config = {}) : config_(config) {}

  void reset(const MeshTask& task);
  StepResult step(int action);

  /// Reward `step(action)` would return. Applies the edit and rolls it back.
  double preview_reward(int action);

  ActionRange legal_actions() const;
  std::vector<bool> legal_mask() const;
  Observation observe() const;

  bool done() const { return done_; }
  const MeshState& state() const { return state_; }
  double iou() const { return coverage_.iou(); }
  int resolution() const { return resolution_; }
  const MeshConfig& config() const { return config_; }

 private:
  EdgeLoop moved(int action) const;
  void replace_loop(int index, const EdgeLoop& next);
  std::vector<EdgeLoop> owner_loops(int owner) const;

  MeshConfig config_;
  MeshState state_;
  int resolution_ = 0;
  bool done_ = true;
  CoverageGrid coverage_;
};

/// Loop feature block: per loop two corners of (x/R, y/R, z/R, axis), then a
/// one-hot over `episode_steps`.
std::vector<float> mesh_features(const MeshState& state, int resolution, int episode_steps);

struct MeshTraceRecord {
  int step = 0;
  int action = 0;
  double reward = 0.0;
  double iou = 0.0;
};

void write_mesh_trace(std::span<const MeshTraceRecord> records, std::ostream& out);

}  // namespace primesh
