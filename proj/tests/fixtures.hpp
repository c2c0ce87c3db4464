#pragma once

#include <random>
#include <vector>

#include "primesh/env/shape.hpp"
#include "primesh/geometry/cuboid.hpp"

namespace primesh::testing {

inline Shape box_shape(int resolution, Box box, const char* name = "box") {
  OccupancyGrid g(resolution);
  g.fill_box(box);
  return make_shape(name, "test", std::move(g));
}

/// Union of `count` random boxes, each at least `min_edge` voxels per side.
inline Shape random_shape(std::mt19937& rng, int resolution, int count = 3, int min_edge = 3) {
  std::uniform_int_distribution<int> edge(min_edge, resolution / 2);
  OccupancyGrid g(resolution);
  for (int i = 0; i < count; ++i) {
    Box b;
    for (int a = 0; a < 3; ++a) {
      const int e = edge(rng);
      std::uniform_int_distribution<int> start(0, resolution - e);
      b.lo[a] = start(rng);
      b.hi[a] = b.lo[a] + e;
    }
    g.fill_box(b);
  }
  return make_shape("random", "test", std::move(g));
}

inline Cuboid random_cuboid(std::mt19937& rng, int resolution, int min_edge = 1) {
  Cuboid c;
  for (int a = 0; a < 3; ++a) {
    std::uniform_int_distribution<int> e(min_edge, resolution);
    const int edge = e(rng);
    std::uniform_int_distribution<int> s(0, resolution - edge);
    c.v[a] = s(rng);
    c.v_prime[a] = c.v[a] + edge;
  }
  return c;
}

}  // namespace primesh::testing
