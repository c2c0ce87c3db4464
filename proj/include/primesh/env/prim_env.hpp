#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <vector>

#include "primesh/env/observation.hpp"
#include "primesh/env/shape.hpp"
#include "primesh/geometry/cuboid.hpp"

namespace primesh {

enum class PrimActionKind { kDragV, kDragVPrime, kDelete };

/// Decoded Prim-Agent action. `axis` is -1 for deletes; `amount` keeps the
/// parameter in {-2,-1,1,2} for every kind so the encoding stays bijective.
struct PrimAction {
  int primitive = 0;
  PrimActionKind kind = PrimActionKind::kDragV;
  int axis = 0;
  int amount = -2;

  friend bool operator==(const PrimAction&, const PrimAction&) = default;
};

inline constexpr int kPrimCount = 27;
inline constexpr int kPrimActionsPerPrimitive = 28;
inline constexpr int kPrimActionCount = kPrimCount * kPrimActionsPerPrimitive;  // 756
inline constexpr int kPrimEpisodeSteps = 300;
inline constexpr std::array<int, 4> kPrimAmounts{-2, -1, 1, 2};

// Layout: index = primitive * 28 + local; local 0..23 = corner * 12 + axis * 4
// + amount rank (corner 0 = V, 1 = V'); local 24..27 = delete.
PrimAction decode_prim_action(int index);
int encode_prim_action(const PrimAction& action);

struct PrimConfig {
  double alpha_local = 0.1;       // weight on the mean per-primitive IoU term
  double alpha_parsimony = 0.01;  // weight on the deleted-primitive count
  double all_deleted_reward = -1.0;
  int episode_steps = kPrimEpisodeSteps;
};

struct PrimState {
  std::shared_ptr<const DepthMap> reference;
  std::shared_ptr<const OccupancyGrid> target;
  std::array<Cuboid, kPrimCount> cuboids{};
  int step = 0;
};

/// The three quantities the reward is a potential difference of.
struct PrimTerms {
  double global_iou = 0.0;  // IoU of the primitive union against the target
  double local_iou = 0.0;   // mean per-primitive IoU over surviving primitives
  int deleted = 0;
};

/// Reward of moving from `before` to `after` (without the all-deleted penalty).
double prim_reward(const PrimTerms& before, const PrimTerms& after, const PrimConfig& config);

/// Initial 3x3x3 seed cuboids: each cell of the canonical frame holds a
/// centred cube of half the cell edge (at least one voxel). Index = ix + 3 iy + 9 iz.
std::array<Cuboid, kPrimCount> initial_cuboids(int resolution);

/// Geometry of `cuboid` after a drag. The moved corner saturates at the grid
/// bounds and one voxel short of the opposite corner.
Cuboid apply_drag(const Cuboid& cuboid, PrimActionKind kind, int axis, int amount, int resolution);

/// Prim-Agent environment. Rewards are computed incrementally from voxel
/// coverage counters; every action touches only the voxels it changes.
class PrimEnv {
 public:
  static constexpr int kActionCount = kPrimActionCount;
  using Task = Shape;

  explicit PrimEnv(PrimConfig config = {}) : config_(config) {}

  void reset(const Shape& shape);

  /// Applies a legal action. Throws ContractViolation for illegal actions or
  /// when the episode is over.
  StepResult step(int action);

  /// One-step reward `step(action)` would return, without changing state.
  double preview_reward(int action) const;

  ActionRange legal_actions() const;
  std::vector<bool> legal_mask() const;
  Observation observe() const;

  bool done() const { return done_; }
  const PrimState& state() const { return state_; }
  const PrimTerms& terms() const { return terms_; }
  const PrimConfig& config() const { return config_; }
  int resolution() const { return resolution_; }
  int live_count() const { return kPrimCount - terms_.deleted; }

 private:
  struct Candidate {
    Cuboid next;
    PrimTerms terms;
    CoverageGrid::Tally tally;
    double primitive_iou = 0.0;
  };

  Candidate evaluate(int action) const;
  double local_iou(int replaced, const Cuboid& with, double with_iou) const;

  PrimConfig config_;
  PrimState state_;
  int resolution_ = 0;
  bool done_ = true;
  std::shared_ptr<const VolumeTable> target_table_;
  CoverageGrid coverage_;
  std::array<double, kPrimCount> primitive_iou_{};
  PrimTerms terms_;
};

/// Reward terms recomputed from scratch by rasterizing every cuboid.
PrimTerms recompute_prim_terms(const std::array<Cuboid, kPrimCount>& cuboids, const OccupancyGrid& target);

/// Observation feature block: 27 x 6 normalized corners (zero for deleted
/// primitives) followed by a one-hot over `episode_steps` (all zero once the
/// episode has run out of steps).
std::vector<float> prim_features(const PrimState& state, int resolution, int episode_steps);

/// Merges primitives whose pairwise union nearly fills their joint bounding
/// box: two passes with thresholds 0.85 then 0.90; each connected component
/// of the "fills >= threshold" graph is replaced by its bounding cuboid.
/// Deleted input primitives are dropped.
std::vector<Cuboid> merge_primitives(std::span<const Cuboid> cuboids,
                                     std::span<const double> thresholds = std::array<double, 2>{0.85, 0.90});

struct PrimTraceRecord {
  int step = 0;
  int action = 0;
  double reward = 0.0;
  PrimTerms terms;
};

void write_prim_trace(std::span<const PrimTraceRecord> records, std::ostream& out);

}  // namespace primesh
