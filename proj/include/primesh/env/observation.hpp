#pragma once

#include <memory>
#include <span>
#include <vector>

#include "primesh/geometry/depth.hpp"

namespace primesh {

/// Contiguous block of action indices legal at a state. Both environments
/// restrict each step to the actions of one primitive or loop, so the legal
/// set is always a single run [begin, end).
struct ActionRange {
  int begin = 0;
  int end = 0;

  bool contains(int action) const { return action >= begin && action < end; }
  int size() const { return end - begin; }
  friend bool operator==(const ActionRange&, const ActionRange&) = default;
};

/// Agent-facing state. The 128x128 reference raster is shared between all
/// observations of a shape; `features` holds the primitive or loop
/// parameters followed by the step one-hot.
struct Observation {
  std::shared_ptr<const DepthMap> reference;
  std::vector<float> features;
  ActionRange legal;

  std::size_t size() const { return DepthMap::kPixels + features.size(); }

  /// Reference raster, row-major, followed by `features`.
  std::vector<float> flatten() const;

  /// Boolean mask over `action_count` actions derived from `legal`.
  std::vector<bool> mask(int action_count) const;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

}  // namespace primesh
