#pragma once

#include "primesh/env/observation.hpp"

namespace primesh {

/// One transition. Observations share their reference raster with every
/// other observation of the same shape, so a record costs little more than
/// its feature vectors.
struct Experience {
  Observation observation;
  int action = 0;
  double reward = 0.0;
  Observation next_observation;
  bool done = false;
  bool is_demo = false;
};

}  // namespace primesh
