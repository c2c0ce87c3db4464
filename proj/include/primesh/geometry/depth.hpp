#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "primesh/geometry/grid.hpp"

namespace primesh {

/// 128x128 single-channel reference raster. Values lie in [0, 1], 0 is background.
class DepthMap {
 public:
  static constexpr int kSize = 128;
  static constexpr std::size_t kPixels = std::size_t{kSize} * kSize;

  DepthMap() : values_(kPixels, 0.0F) {}

  float at(int row, int col) const { return values_[static_cast<std::size_t>(row) * kSize + col]; }
  float& at(int row, int col) { return values_[static_cast<std::size_t>(row) * kSize + col]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  std::vector<float> values_;
};

/// Orthographic front view looking down -z. A pixel holds (z + 1) / R for the
/// nearest occupied voxel along its ray (so the front face z = R-1 maps to 1)
/// and 0 when the ray misses. Row 0 is the top (y = R-1); column 0 is x = 0.
/// Each pixel samples the voxel column under its center (nearest neighbour).
DepthMap render_depth(const OccupancyGrid& grid);

/// Grayscale little-endian PFM, rows stored bottom-to-top per the format.
void write_pfm(const DepthMap& map, std::ostream& out);
DepthMap read_pfm(std::istream& in);

}  // namespace primesh
