#pragma once

#include <memory>
#include <string>

#include "primesh/geometry/depth.hpp"
#include "primesh/geometry/grid.hpp"

namespace primesh {

/// A modelling target: the hidden occupancy grid plus its reference raster.
struct Shape {
  std::string name;
  std::string category;
  std::shared_ptr<const OccupancyGrid> target;
  std::shared_ptr<const DepthMap> reference;

  int resolution() const { return target->resolution(); }
};

/// Builds a shape, rendering the reference from the target.
Shape make_shape(std::string name, std::string category, OccupancyGrid target);

}  // namespace primesh
