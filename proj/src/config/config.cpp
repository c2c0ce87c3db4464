#include "primesh/config/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace primesh {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw FormatError("'" + text + "' is not a valid number");
  return value;
}

template <class T>
std::string format_number(T value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, ptr);
}

template <std::size_t N>
std::array<int, N> parse_list(const std::string& text) {
  std::array<int, N> out{};
  std::stringstream in(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(in, item, ',')) {
    if (i == N) throw FormatError("'" + text + "' has more than " + std::to_string(N) + " entries");
    out[i++] = parse_number<int>(trim(item));
  }
  if (i != N) throw FormatError("'" + text + "' needs " + std::to_string(N) + " comma-separated entries");
  return out;
}

template <std::size_t N>
std::string format_list(const std::array<int, N>& values) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field number(const char* section, const char* key, T RunConfig::*outer) {
  return {section, key, [outer](RunConfig& c, const std::string& v) { c.*outer = parse_number<T>(v); },
          [outer](const RunConfig& c) { return format_number(c.*outer); }};
}

template <class Sub, class T>
Field nested(const char* section, const char* key, Sub RunConfig::*sub, T Sub::*member) {
  return {section, key, [sub, member](RunConfig& c, const std::string& v) { (c.*sub).*member = parse_number<T>(v); },
          [sub, member](const RunConfig& c) { return format_number((c.*sub).*member); }};
}

template <std::size_t N>
Field list(const char* section, const char* key, std::array<int, N> NetworkConfig::*member) {
  return {section, key, [member](RunConfig& c, const std::string& v) { c.network.*member = parse_list<N>(v); },
          [member](const RunConfig& c) { return format_list(c.network.*member); }};
}

Field path(const char* key, std::string RunConfig::*member) {
  return {"paths", key, [member](RunConfig& c, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(number("geometry", "resolution", &RunConfig::resolution));
    f.push_back(number("geometry", "chamfer_samples", &RunConfig::chamfer_samples));
    f.push_back(nested("env", "prim_episode_steps", &RunConfig::prim, &PrimConfig::episode_steps));
    f.push_back(nested("env", "mesh_episode_steps", &RunConfig::mesh, &MeshConfig::episode_steps));
    f.push_back(nested("env", "alpha_local", &RunConfig::prim, &PrimConfig::alpha_local));
    f.push_back(nested("env", "alpha_parsimony", &RunConfig::prim, &PrimConfig::alpha_parsimony));
    f.push_back(nested("env", "all_deleted_reward", &RunConfig::prim, &PrimConfig::all_deleted_reward));
    f.push_back(nested("network", "reference_pool", &RunConfig::network, &NetworkConfig::reference_pool));
    f.push_back(list("network", "conv_channels", &NetworkConfig::conv_channels));
    f.push_back(list("network", "conv_kernels", &NetworkConfig::conv_kernels));
    f.push_back(nested("network", "conv_stride", &RunConfig::network, &NetworkConfig::conv_stride));
    f.push_back(list("network", "param_hidden", &NetworkConfig::param_hidden));
    f.push_back(nested("network", "step_hidden", &RunConfig::network, &NetworkConfig::step_hidden));
    f.push_back(list("network", "head_hidden", &NetworkConfig::head_hidden));
    f.push_back(nested("training", "learning_rate", &RunConfig::training, &TrainConfig::learning_rate));
    f.push_back(nested("training", "rl_learning_rate", &RunConfig::training, &TrainConfig::rl_learning_rate));
    f.push_back(nested("training", "batch_size", &RunConfig::training, &TrainConfig::batch_size));
    f.push_back(nested("training", "dagger_iterations", &RunConfig::training, &TrainConfig::dagger_iterations));
    f.push_back(nested("training", "updates_per_iteration", &RunConfig::training, &TrainConfig::updates_per_iteration));
    f.push_back(nested("training", "target_sync_interval", &RunConfig::training, &TrainConfig::target_sync_interval));
    f.push_back(nested("training", "epsilon", &RunConfig::training, &TrainConfig::epsilon));
    f.push_back(nested("training", "demo_capacity", &RunConfig::training, &TrainConfig::demo_capacity));
    f.push_back(nested("training", "self_capacity", &RunConfig::training, &TrainConfig::self_capacity));
    f.push_back(nested("training", "rl_episodes", &RunConfig::training, &TrainConfig::rl_episodes));
    f.push_back(nested("training", "rl_update_interval", &RunConfig::training, &TrainConfig::rl_update_interval));
    f.push_back(nested("training", "rl_warmup", &RunConfig::training, &TrainConfig::rl_warmup));
    f.push_back(nested("training", "seed", &RunConfig::training, &TrainConfig::seed));
    f.push_back({"training", "gamma", [](RunConfig& c, const std::string& v) { c.training.loss.gamma = parse_number<double>(v); },
                 [](const RunConfig& c) { return format_number(c.training.loss.gamma); }});
    f.push_back({"training", "margin", [](RunConfig& c, const std::string& v) { c.training.loss.margin = parse_number<double>(v); },
                 [](const RunConfig& c) { return format_number(c.training.loss.margin); }});
    f.push_back({"training", "lambda", [](RunConfig& c, const std::string& v) { c.training.loss.lambda = parse_number<double>(v); },
                 [](const RunConfig& c) { return format_number(c.training.loss.lambda); }});
    f.push_back(path("dataset", &RunConfig::dataset));
    f.push_back(path("eval_dataset", &RunConfig::eval_dataset));
    f.push_back(path("run_dir", &RunConfig::run_dir));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (section == f.section && key == f.key) return &f;
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& f : fields())
    if (section == f.section) return true;
  return false;
}

}  // namespace

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = "line " + std::to_string(line_no) + ": ";
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) throw FormatError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(where + "expected key = value");
    if (section.empty()) throw FormatError(where + "key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const Field* field = find_field(section, key);
    if (!field) throw FormatError(where + "unknown key '" + key + "' in [" + section + "]");
    try {
      field->set(base, trim(line.substr(eq + 1)));
    } catch (const FormatError& e) {
      throw FormatError(where + section + "." + key + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  try {
    return parse_config(in, std::move(base));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw FormatError("override '" + assignment + "' must look like section.key=value");
  const Field* field = find_field(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)));
  if (!field) throw FormatError("override '" + assignment + "' names an unknown key");
  try {
    field->set(config, trim(assignment.substr(eq + 1)));
  } catch (const FormatError& e) {
    throw FormatError("override '" + assignment + "': " + e.what());
  }
}

void validate(const RunConfig& c) {
  require(c.resolution >= 8 && c.resolution <= DepthMap::kSize, "geometry.resolution must lie in [8, 128]");
  require(c.chamfer_samples >= 1, "geometry.chamfer_samples must be positive");
  require(c.prim.episode_steps >= 1, "env.prim_episode_steps must be positive");
  require(c.mesh.episode_steps >= 1, "env.mesh_episode_steps must be positive");
  require(c.network.reference_pool >= 1 && DepthMap::kSize % c.network.reference_pool == 0,
          "network.reference_pool must divide 128");
  for (int v : c.network.conv_channels) require(v >= 1, "network.conv_channels must be positive");
  for (int v : c.network.conv_kernels) require(v >= 1, "network.conv_kernels must be positive");
  require(c.network.conv_stride >= 1, "network.conv_stride must be positive");
  for (int v : c.network.param_hidden) require(v >= 1, "network.param_hidden must be positive");
  require(c.network.step_hidden >= 1, "network.step_hidden must be positive");
  for (int v : c.network.head_hidden) require(v >= 1, "network.head_hidden must be positive");
  const TrainConfig& t = c.training;
  require(t.learning_rate > 0 && t.rl_learning_rate > 0, "training learning rates must be positive");
  require(t.batch_size >= 2 && t.batch_size % 2 == 0, "training.batch_size must be a positive even number");
  require(t.dagger_iterations >= 1, "training.dagger_iterations must be at least 1");
  require(t.updates_per_iteration >= 0, "training.updates_per_iteration must be non-negative");
  require(t.target_sync_interval >= 1, "training.target_sync_interval must be positive");
  require(t.epsilon >= 0 && t.epsilon <= 1, "training.epsilon must lie in [0, 1]");
  require(t.loss.gamma >= 0 && t.loss.gamma <= 1, "training.gamma must lie in [0, 1]");
  require(t.loss.margin >= 0 && t.loss.lambda >= 0, "training.margin and training.lambda must be non-negative");
  require(t.demo_capacity >= 1 && t.self_capacity >= 1, "training buffer capacities must be positive");
  require(t.rl_episodes >= 0, "training.rl_episodes must be non-negative");
  require(t.rl_update_interval >= 1, "training.rl_update_interval must be positive");
  require(t.rl_warmup >= 1, "training.rl_warmup must be positive");
  require(!c.run_dir.empty(), "paths.run_dir must be set");
  // The conv stack must leave at least one output position.
  QNetwork<float>(c.network, prim_layout(c.prim.episode_steps));
}

void write_config(const RunConfig& config, std::ostream& out) {
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      out << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
}

std::filesystem::path resolve_run_dir(const RunConfig& config) {
  std::filesystem::path dir(config.run_dir);
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv("PRIMESH_RUN_ROOT");
  return (root && *root ? std::filesystem::path(root) : std::filesystem::current_path()) / dir;
}

}  // namespace primesh
