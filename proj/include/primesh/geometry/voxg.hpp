#pragma once

#include <filesystem>
#include <iosfwd>

#include "primesh/geometry/grid.hpp"

namespace primesh {

// VOXG layout: "VOXG", u32 LE resolution, 8 zero bytes, then R^3 bytes of
// 0/1 in x-fastest order.
void write_voxg(const OccupancyGrid& grid, std::ostream& out);
OccupancyGrid read_voxg(std::istream& in);

void save_voxg(const OccupancyGrid& grid, const std::filesystem::path& path);
OccupancyGrid load_voxg(const std::filesystem::path& path);

}  // namespace primesh
