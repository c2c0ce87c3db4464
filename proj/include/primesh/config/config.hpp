#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "primesh/env/mesh_env.hpp"
#include "primesh/env/prim_env.hpp"
#include "primesh/train/trainer.hpp"

namespace primesh {

/// Every tunable of a run. Defaults are the full-scale values; the shipped
/// desk profile overrides them for a laptop-sized benchmark.
struct RunConfig {
  // [geometry]
  int resolution = 64;
  int chamfer_samples = 2048;
  // [env]
  PrimConfig prim;
  MeshConfig mesh;
  // [network]
  NetworkConfig network;
  // [training]
  TrainConfig training;
  // [paths]
  std::string dataset = "data/train";
  std::string eval_dataset = "data/eval";
  std::string run_dir = "runs/default";
};

/// Reads a flat key=value file with [section] headers; '#' starts a comment.
/// Keys absent from the file keep their defaults. Unknown sections or keys and
/// malformed values raise FormatError naming the line.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Applies one "section.key=value" override.
void apply_override(RunConfig& config, const std::string& assignment);

/// Throws ContractViolation describing the first out-of-range value.
void validate(const RunConfig& config);

/// Writes every key, so the output reloads to an identical configuration.
void write_config(const RunConfig& config, std::ostream& out);

/// Resolves a relative run directory against $PRIMESH_RUN_ROOT (or the
/// working directory when unset).
std::filesystem::path resolve_run_dir(const RunConfig& config);

}  // namespace primesh
