#include "primesh/geometry/depth.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace primesh {

DepthMap render_depth(const OccupancyGrid& grid) {
  const int r = grid.resolution();
  require(r <= DepthMap::kSize, "render_depth: resolution exceeds raster size");
  // Depth of the first hit per (x, y) column, then upsample.
  std::vector<float> front(static_cast<std::size_t>(r) * r, 0.0F);
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x)
      for (int z = r - 1; z >= 0; --z)
        if (grid.at(x, y, z)) {
          front[static_cast<std::size_t>(y) * r + x] = static_cast<float>(z + 1) / static_cast<float>(r);
          break;
        }
  DepthMap map;
  for (int row = 0; row < DepthMap::kSize; ++row) {
    const int y = r - 1 - (2 * row + 1) * r / (2 * DepthMap::kSize);
    for (int col = 0; col < DepthMap::kSize; ++col) {
      const int x = (2 * col + 1) * r / (2 * DepthMap::kSize);
      map.at(row, col) = front[static_cast<std::size_t>(y) * r + x];
    }
  }
  return map;
}

void write_pfm(const DepthMap& map, std::ostream& out) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
  out << "Pf\n" << DepthMap::kSize << ' ' << DepthMap::kSize << "\n-1.0\n";
  for (int row = DepthMap::kSize - 1; row >= 0; --row)
    for (int col = 0; col < DepthMap::kSize; ++col) {
      const float v = map.at(row, col);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  if (!out) throw FormatError("write_pfm: write failed");
}

DepthMap read_pfm(std::istream& in) {
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || magic != "Pf") throw FormatError("read_pfm: not a grayscale PFM");
  if (width != DepthMap::kSize || height != DepthMap::kSize) throw FormatError("read_pfm: expected 128x128");
  if (scale >= 0.0) throw FormatError("read_pfm: only little-endian PFM is supported");
  in.get();  // single whitespace byte before the payload
  DepthMap map;
  for (int row = DepthMap::kSize - 1; row >= 0; --row)
    for (int col = 0; col < DepthMap::kSize; ++col) {
      float v = 0.0F;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      map.at(row, col) = v;
    }
  if (!in) throw FormatError("read_pfm: truncated payload");
  return map;
}

}  // namespace primesh
