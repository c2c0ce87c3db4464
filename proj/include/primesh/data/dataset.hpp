#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "primesh/env/shape.hpp"

namespace primesh {

inline constexpr std::array<const char*, 3> kSyntheticCategories{"boxy-tables", "boxy-planes", "boxy-cars"};

/// Union of 2-5 axis-aligned boxes following the category's proportions
/// (y is up, the front view looks down -z). Deterministic in (seed, index).
OccupancyGrid synthetic_grid(const std::string& category, int resolution, std::uint64_t seed, int index);

/// `count` shapes of one category, named "<category>-NNN".
std::vector<Shape> synthetic_shapes(const std::string& category, int count, int resolution, std::uint64_t seed);

/// `count` shapes cycling through the three categories.
std::vector<Shape> synthetic_benchmark(int count, int resolution, std::uint64_t seed);

// A dataset directory holds <name>.voxg and <name>.pfm per shape plus
// manifest.json: {"resolution": R, "shapes": [{"name", "category", "grid",
// "depth", "occupied"}]} with paths relative to the directory.
void write_dataset(const std::filesystem::path& dir, const std::vector<Shape>& shapes);

/// Loads every manifest entry; the reference raster is re-read from its PFM.
std::vector<Shape> load_dataset(const std::filesystem::path& dir);

struct IngestIssue {
  std::filesystem::path file;
  std::string message;
};

/// Outcome of validating external grids. `shapes` is empty whenever any issue
/// was found; nothing is written in that case.
struct IngestReport {
  std::vector<Shape> shapes;
  std::vector<IngestIssue> issues;
  bool ok() const { return issues.empty(); }
};

/// Validates VOXG files (readable, non-empty, one shared resolution) and
/// renders their references. Shape names are the file stems; issues follow
/// the input order.
IngestReport validate_grids(const std::vector<std::filesystem::path>& files, const std::string& category);

}  // namespace primesh
