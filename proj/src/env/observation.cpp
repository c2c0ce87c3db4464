#include "primesh/env/observation.hpp"

#include "primesh/env/shape.hpp"

namespace primesh {

std::vector<float> Observation::flatten() const {
  std::vector<float> out;
  out.reserve(size());
  if (reference) {
    const auto px = reference->values();
    out.insert(out.end(), px.begin(), px.end());
  } else {
    out.resize(DepthMap::kPixels, 0.0F);
  }
  out.insert(out.end(), features.begin(), features.end());
  return out;
}

std::vector<bool> Observation::mask(int action_count) const {
  std::vector<bool> m(static_cast<std::size_t>(action_count), false);
  for (int a = legal.begin; a < legal.end; ++a) m[static_cast<std::size_t>(a)] = true;
  return m;
}

Shape make_shape(std::string name, std::string category, OccupancyGrid target) {
  Shape shape;
  shape.name = std::move(name);
  shape.category = std::move(category);
  shape.reference = std::make_shared<const DepthMap>(render_depth(target));
  shape.target = std::make_shared<const OccupancyGrid>(std::move(target));
  return shape;
}

}  // namespace primesh
