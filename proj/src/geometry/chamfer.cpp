#include "primesh/geometry/chamfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace primesh {
namespace {

struct Face {
  Vec3i cell;
  int axis;  // face normal axis
  int side;  // 0 = low face, 1 = high face
};

// Static kd-tree over a point set, exact nearest-neighbour queries.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points) : points_(points), order_(points.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    build(0, order_.size(), 0);
  }

  double nearest_squared(const Point3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(0, order_.size(), 0, q, best);
    return best;
  }

 private:
  void build(std::size_t begin, std::size_t end, int depth) {
    if (end - begin <= kLeaf) return;
    const int axis = depth % 3;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    build(begin, mid, depth + 1);
    build(mid + 1, end, depth + 1);
  }

  void search(std::size_t begin, std::size_t end, int depth, const Point3& q, double& best) const {
    if (end - begin <= kLeaf) {
      for (std::size_t i = begin; i < end; ++i) best = std::min(best, squared(points_[order_[i]], q));
      return;
    }
    const int axis = depth % 3;
    const std::size_t mid = begin + (end - begin) / 2;
    const Point3& pivot = points_[order_[mid]];
    best = std::min(best, squared(pivot, q));
    const double diff = q[axis] - pivot[axis];
    if (diff < 0) {
      search(begin, mid, depth + 1, q, best);
      if (diff * diff < best) search(mid + 1, end, depth + 1, q, best);
    } else {
      search(mid + 1, end, depth + 1, q, best);
      if (diff * diff < best) search(begin, mid, depth + 1, q, best);
    }
  }

  static double squared(const Point3& a, const Point3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
  }

  static constexpr std::size_t kLeaf = 8;
  std::span<const Point3> points_;
  std::vector<std::size_t> order_;
};

double mean_nearest(std::span<const Point3> from, std::span<const Point3> to) {
  const KdTree tree(to);
  double sum = 0.0;
  for (const auto& p : from) sum += std::sqrt(tree.nearest_squared(p));
  return sum / static_cast<double>(from.size());
}

}  // namespace

std::vector<Point3> sample_surface_points(const OccupancyGrid& grid, std::size_t count, std::uint64_t seed) {
  const int r = grid.resolution();
  std::vector<Face> faces;
  auto occupied = [&](int x, int y, int z) {
    return x >= 0 && y >= 0 && z >= 0 && x < r && y < r && z < r && grid.at(x, y, z);
  };
  for (int z = 0; z < r; ++z)
    for (int y = 0; y < r; ++y)
      for (int x = 0; x < r; ++x) {
        if (!grid.at(x, y, z)) continue;
        const Vec3i cell{x, y, z};
        for (int axis = 0; axis < 3; ++axis)
          for (int side = 0; side < 2; ++side) {
            Vec3i n = cell;
            n[axis] += side == 0 ? -1 : 1;
            if (!occupied(n[0], n[1], n[2])) faces.push_back({cell, axis, side});
          }
      }
  std::vector<Point3> points;
  if (faces.empty()) return points;
  points.reserve(count);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, faces.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const Face& f = faces[pick(rng)];
    Point3 p{};
    for (int axis = 0; axis < 3; ++axis)
      p[axis] = axis == f.axis ? f.cell[axis] + f.side : f.cell[axis] + unit(rng);
    points.push_back(p);
  }
  return points;
}

double chamfer_distance(std::span<const Point3> a, std::span<const Point3> b, int resolution) {
  require(!a.empty() && !b.empty(), "chamfer_distance: empty point set");
  require(resolution > 0, "chamfer_distance: resolution must be positive");
  return (mean_nearest(a, b) + mean_nearest(b, a)) / static_cast<double>(resolution);
}

double chamfer_distance(const OccupancyGrid& a, const OccupancyGrid& b, std::size_t samples, std::uint64_t seed) {
  require(a.resolution() == b.resolution(), "chamfer_distance: resolution mismatch");
  const auto pa = sample_surface_points(a, samples, seed);
  const auto pb = sample_surface_points(b, samples, seed + 1);
  return chamfer_distance(pa, pb, a.resolution());
}

}  // namespace primesh
