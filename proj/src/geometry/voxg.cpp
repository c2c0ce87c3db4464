#include "primesh/geometry/voxg.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>

namespace primesh {

void write_voxg(const OccupancyGrid& grid, std::ostream& out) {
  std::array<char, 16> header{'V', 'O', 'X', 'G'};
  const auto r = static_cast<std::uint32_t>(grid.resolution());
  for (int i = 0; i < 4; ++i) header[4 + i] = static_cast<char>((r >> (8 * i)) & 0xFFU);
  out.write(header.data(), header.size());
  const auto cells = grid.cells();
  out.write(reinterpret_cast<const char*>(cells.data()), static_cast<std::streamsize>(cells.size()));
  if (!out) throw FormatError("write_voxg: write failed");
}

OccupancyGrid read_voxg(std::istream& in) {
  std::array<unsigned char, 16> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (!in) throw FormatError("read_voxg: truncated header");
  if (header[0] != 'V' || header[1] != 'O' || header[2] != 'X' || header[3] != 'G')
    throw FormatError("read_voxg: bad magic");
  std::uint32_t r = 0;
  for (int i = 0; i < 4; ++i) r |= std::uint32_t{header[4 + i]} << (8 * i);
  for (int i = 8; i < 16; ++i)
    if (header[i] != 0) throw FormatError("read_voxg: reserved header bytes must be zero");
  if (r == 0 || r > 1024) throw FormatError("read_voxg: implausible resolution " + std::to_string(r));
  OccupancyGrid grid(static_cast<int>(r));
  auto cells = grid.cells();
  in.read(reinterpret_cast<char*>(cells.data()), static_cast<std::streamsize>(cells.size()));
  if (!in) throw FormatError("read_voxg: truncated payload");
  for (auto c : cells)
    if (c > 1) throw FormatError("read_voxg: cell values must be 0 or 1");
  return grid;
}

void save_voxg(const OccupancyGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_voxg(grid, out);
}

OccupancyGrid load_voxg(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_voxg(in);
}

}  // namespace primesh
