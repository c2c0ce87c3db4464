#include "primesh/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "json.hpp"
#include "primesh/geometry/voxg.hpp"

namespace primesh {

namespace {

using Json = nlohmann::json;

int category_id(const std::string& category) {
  for (std::size_t i = 0; i < kSyntheticCategories.size(); ++i)
    if (category == kSyntheticCategories[i]) return static_cast<int>(i);
  throw ContractViolation("unknown category '" + category + "' (expected boxy-tables, boxy-planes or boxy-cars)");
}

class BoxSampler {
 public:
  BoxSampler(int resolution, std::mt19937_64& rng) : r_(resolution), rng_(rng) {}

  /// Length drawn from [lo, hi] * R, at least two voxels.
  int length(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return std::clamp(static_cast<int>(std::lround(d(rng_) * r_)), 2, r_);
  }
  int count(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return std::bernoulli_distribution(0.5)(rng_); }
  int centered(int len) const { return (r_ - len) / 2; }

  void add(Vec3i lo, Vec3i size) {
    Box b;
    for (int a = 0; a < 3; ++a) {
      b.lo[a] = std::clamp(lo[a], 0, r_ - 1);
      b.hi[a] = std::clamp(lo[a] + size[a], b.lo[a] + 1, r_);
    }
    boxes_.push_back(b);
  }
  const std::vector<Box>& boxes() const { return boxes_; }

 private:
  int r_;
  std::mt19937_64& rng_;
  std::vector<Box> boxes_;
};

// Top slab on one to four legs (a single leg is a central pedestal).
void table(BoxSampler& s) {
  const int w = s.length(0.6, 0.9), d = s.length(0.4, 0.7), t = s.length(0.08, 0.14);
  const int height = s.length(0.45, 0.75);
  const int x0 = s.centered(w), z0 = s.centered(d);
  s.add({x0, height - t, z0}, {w, t, d});
  const int legs = s.count(1, 4);
  const int leg = s.length(0.08, 0.14);
  if (legs == 1) {
    s.add({s.centered(leg * 2), 0, s.centered(leg * 2)}, {leg * 2, height - t, leg * 2});
    return;
  }
  const std::array<std::array<int, 2>, 4> corners{{{x0, z0},
                                                   {x0 + w - leg, z0 + d - leg},
                                                   {x0 + w - leg, z0},
                                                   {x0, z0 + d - leg}}};
  for (int i = 0; i < legs; ++i) s.add({corners[i][0], 0, corners[i][1]}, {leg, height - t, leg});
}

// Fuselage along z with a wing, plus up to three of tailplane, fin, engines.
void plane(BoxSampler& s) {
  const int len = s.length(0.7, 0.95), body = s.length(0.12, 0.2);
  const int fz = s.centered(len), fy = s.centered(body), fx = s.centered(body);
  s.add({fx, fy, fz}, {body, body, len});
  const int span = s.length(0.7, 0.95), chord = s.length(0.12, 0.25), thick = s.length(0.05, 0.08);
  const int wing_z = fz + static_cast<int>(len * 0.45) - chord / 2;
  s.add({s.centered(span), fy + body / 2 - thick / 2, wing_z}, {span, thick, chord});
  const int extras = s.count(0, 3);
  const int tail_chord = std::max(2, chord / 2);
  if (extras >= 1) {
    const int tail = s.length(0.25, 0.4);
    s.add({s.centered(tail), fy + body - thick, fz}, {tail, thick, tail_chord});
  }
  if (extras >= 2) s.add({fx + body / 2 - 1, fy + body, fz}, {2, s.length(0.12, 0.22), tail_chord});
  if (extras >= 3) {
    const int pod = std::max(2, body / 2);
    s.add({s.centered(span / 2), fy - pod + thick, wing_z}, {span / 2, pod, chord});
  }
}

// Body on axle blocks with a cabin, plus an optional spoiler.
void car(BoxSampler& s) {
  const int len = s.length(0.7, 0.95), w = s.length(0.4, 0.6), h = s.length(0.15, 0.25);
  const int clearance = s.length(0.08, 0.12);
  const int x0 = s.centered(w), z0 = s.centered(len);
  s.add({x0, clearance, z0}, {w, h, len});
  const int cabin_len = std::max(2, static_cast<int>(len * (0.35 + 0.2 * s.coin()))), cabin_h = s.length(0.1, 0.18);
  const int inset = std::max(1, w / 10);
  s.add({x0 + inset, clearance + h, z0 + (len - cabin_len) / 2}, {w - 2 * inset, cabin_h, cabin_len});
  const int extras = s.count(0, 3);
  const int wheel = std::max(2, clearance + 1);
  if (extras >= 1) s.add({x0, 0, z0 + wheel / 2}, {w, clearance + 1, wheel});
  if (extras >= 2) s.add({x0, 0, z0 + len - wheel - wheel / 2}, {w, clearance + 1, wheel});
  if (extras >= 3) s.add({x0, clearance + h, z0}, {w, 2, 2});
}

std::string shape_name(const std::string& category, int index) {
  std::ostringstream name;
  name << category << '-' << std::setw(3) << std::setfill('0') << index;
  return name.str();
}

}  // namespace

OccupancyGrid synthetic_grid(const std::string& category, int resolution, std::uint64_t seed, int index) {
  const int id = category_id(category);
  require(resolution >= 16 && resolution <= 128, "synthetic_grid: resolution must lie in [16, 128]");
  require(index >= 0, "synthetic_grid: negative index");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(id)};
  std::mt19937_64 rng(seq);
  BoxSampler s(resolution, rng);
  switch (id) {
    case 0: table(s); break;
    case 1: plane(s); break;
    default: car(s); break;
  }
  OccupancyGrid g(resolution);
  for (const auto& b : s.boxes()) g.fill_box(b);
  return g;
}

std::vector<Shape> synthetic_shapes(const std::string& category, int count, int resolution, std::uint64_t seed) {
  require(count >= 1, "synthetic_shapes: count must be at least 1");
  std::vector<Shape> out;
  for (int i = 0; i < count; ++i)
    out.push_back(make_shape(shape_name(category, i), category, synthetic_grid(category, resolution, seed, i)));
  return out;
}

std::vector<Shape> synthetic_benchmark(int count, int resolution, std::uint64_t seed) {
  require(count >= 1, "synthetic_benchmark: count must be at least 1");
  std::vector<Shape> out;
  for (int i = 0; i < count; ++i) {
    const std::string category = kSyntheticCategories[static_cast<std::size_t>(i) % kSyntheticCategories.size()];
    out.push_back(make_shape(shape_name(category, i), category, synthetic_grid(category, resolution, seed, i)));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Shape>& shapes) {
  require(!shapes.empty(), "write_dataset: no shapes");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
  Json manifest;
  manifest["resolution"] = shapes.front().resolution();
  manifest["shapes"] = Json::array();
  for (const auto& shape : shapes) {
    require(shape.resolution() == shapes.front().resolution(), "write_dataset: mixed resolutions");
    const std::string grid = shape.name + ".voxg", depth = shape.name + ".pfm";
    save_voxg(*shape.target, dir / grid);
    std::ofstream pfm(dir / depth, std::ios::binary);
    if (!pfm) throw FormatError("cannot open " + (dir / depth).string() + " for writing");
    write_pfm(*shape.reference, pfm);
    manifest["shapes"].push_back({{"name", shape.name},
                                  {"category", shape.category},
                                  {"grid", grid},
                                  {"depth", depth},
                                  {"occupied", shape.target->count()}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw FormatError("write failed: " + (dir / "manifest.json").string());
}

std::vector<Shape> load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("no manifest.json in " + dir.string());
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  std::vector<Shape> out;
  try {
    const int resolution = manifest.at("resolution").get<int>();
    for (const auto& entry : manifest.at("shapes")) {
      auto grid = std::make_shared<OccupancyGrid>(load_voxg(dir / entry.at("grid").get<std::string>()));
      if (grid->resolution() != resolution)
        throw FormatError(entry.at("grid").get<std::string>() + ": resolution " + std::to_string(grid->resolution()) +
                          " differs from the manifest's " + std::to_string(resolution));
      std::ifstream pfm(dir / entry.at("depth").get<std::string>(), std::ios::binary);
      if (!pfm) throw FormatError("cannot open " + (dir / entry.at("depth").get<std::string>()).string());
      out.push_back(Shape{entry.at("name").get<std::string>(), entry.at("category").get<std::string>(),
                          std::move(grid), std::make_shared<DepthMap>(read_pfm(pfm))});
    }
  } catch (const Json::exception& e) {
    throw FormatError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (out.empty()) throw FormatError("dataset " + dir.string() + " has no shapes");
  return out;
}

IngestReport validate_grids(const std::vector<std::filesystem::path>& files, const std::string& category) {
  IngestReport report;
  if (files.empty()) {
    report.issues.push_back({{}, "no input files"});
    return report;
  }
  std::vector<std::pair<std::filesystem::path, OccupancyGrid>> grids;
  for (const auto& file : files) {
    try {
      OccupancyGrid g = load_voxg(file);
      if (g.count() == 0)
        report.issues.push_back({file, "empty grid"});
      else
        grids.emplace_back(file, std::move(g));
    } catch (const FormatError& e) {
      report.issues.push_back({file, e.what()});
    }
  }
  if (!grids.empty()) {
    const int expected = grids.front().second.resolution();
    for (const auto& [file, g] : grids)
      if (g.resolution() != expected)
        report.issues.push_back({file, "resolution " + std::to_string(g.resolution()) + " differs from " +
                                           std::to_string(expected) + " (" + grids.front().first.string() + ")"});
  }
  auto position = [&files](const IngestIssue& i) { return std::find(files.begin(), files.end(), i.file) - files.begin(); };
  std::stable_sort(report.issues.begin(), report.issues.end(),
                   [&](const IngestIssue& a, const IngestIssue& b) { return position(a) < position(b); });
  if (!report.ok()) return report;
  for (auto& [file, g] : grids) report.shapes.push_back(make_shape(file.stem().string(), category, std::move(g)));
  return report;
}

}  // namespace primesh
