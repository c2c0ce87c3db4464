#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "primesh/env/mesh_env.hpp"
#include "primesh/env/prim_env.hpp"
#include "primesh/expert/virtual_expert.hpp"
#include "primesh/nn/losses.hpp"
#include "primesh/replay/replay_buffer.hpp"

namespace primesh {

struct TrainConfig {
  LossConfig loss;
  double learning_rate = 8e-5;     // imitation phase
  double rl_learning_rate = 8e-5;  // self-exploration phase
  int batch_size = 64;
  int dagger_iterations = 4;
  int updates_per_iteration = 4000;
  int target_sync_interval = 4000;
  double epsilon = 0.02;
  std::size_t demo_capacity = 200000;
  std::size_t self_capacity = 100000;
  int rl_episodes = 1;          // passes over the shape set during self-exploration
  int rl_update_interval = 1;   // environment steps per network update
  int rl_warmup = 300;          // D_self size before the first update
  std::uint64_t seed = 0;
};

enum class Scheme { kDdqnOnly, kDaggerOnly, kDqfdStyle, kDaggerStar, kFull };

Scheme parse_scheme(const std::string& name);
std::string scheme_name(Scheme scheme);
inline constexpr std::array<Scheme, 5> kAllSchemes{Scheme::kDdqnOnly, Scheme::kDaggerOnly, Scheme::kDqfdStyle,
                                                   Scheme::kDaggerStar, Scheme::kFull};

/// Input sizes of each agent's network.
InputLayout prim_layout(int episode_steps = kPrimEpisodeSteps);
InputLayout mesh_layout(int episode_steps = kMeshEpisodeSteps);

/// Imitation phase variants.
struct IlOptions {
  bool relabel = true;        // roll out each pi_k and label its states with the expert
  bool double_buffer = true;  // sample equally from short- and long-term demo buffers
  bool supervised_only = false;  // margin loss only (no TD term)
};

/// Snapshot handed to the iteration hook after each DAgger iteration.
struct IterationReport {
  std::size_t task = 0;
  int iteration = 0;
  const std::vector<Experience>* relabeled = nullptr;  // D_k
  const ReplayBuffer* demo_short = nullptr;
  const ReplayBuffer* demo_long = nullptr;
  long updates = 0;
};

/// Loss terms of the most recent update (margin is 0 for TD-only updates).
struct LossSummary {
  double loss = 0.0;
  double td = 0.0;
  double margin = 0.0;
};

/// Final-state quality of one episode.
struct EpisodeResult {
  double accumulated_reward = 0.0;
  double iou = 0.0;
  double chamfer = 0.0;
  std::vector<int> actions;
};

/// Learner for one agent type. Owns the current/target networks, the
/// optimizer and the three replay buffers.
template <class Env>
class Trainer {
 public:
  using Task = typename Env::Task;

  Trainer(Env prototype, const NetworkConfig& network, const TrainConfig& config);

  /// DAgger with the virtual expert. Shapes form the outer loop; each shape
  /// gets `dagger_iterations` rounds of training, greedy rollout and relabeling.
  void run_il(std::span<const Task> tasks, const IlOptions& options = {});

  /// Epsilon-greedy self-exploration into D_self; every update mixes D_self
  /// and D_demo_long equally (D_self alone when no demonstrations exist) and
  /// uses the TD loss only.
  void run_rl(std::span<const Task> tasks);

  /// Greedy (epsilon = 0) episode with the current network.
  EpisodeResult evaluate(const Task& task) const;

  /// Expert-agreement rate of the greedy policy on `records`' states.
  double agreement(std::span<const Experience> records) const;

  std::function<void(const IterationReport&)> on_iteration;

  DDQNPair<float>& networks() { return pair_; }
  const DDQNPair<float>& networks() const { return pair_; }
  const ReplayBuffer& demo_short() const { return demo_short_; }
  const ReplayBuffer& demo_long() const { return demo_long_; }
  /// D_self exists only once self-exploration has started.
  const ReplayBuffer* self_buffer() const { return self_ ? &*self_ : nullptr; }
  long updates() const { return updates_; }
  const TrainConfig& config() const { return config_; }
  const LossSummary& last_loss() const { return last_loss_; }

 private:
  enum class Loss { kCombined, kMargin, kTd };
  void update(std::span<const Experience* const> batch, Loss loss);
  std::vector<Experience> relabeled_rollout(const Task& task);

  Env env_;
  TrainConfig config_;
  DDQNPair<float> pair_;
  Adam<float> adam_;
  ReplayBuffer demo_short_;
  ReplayBuffer demo_long_;
  std::optional<ReplayBuffer> self_;
  Rng rng_;
  long updates_ = 0;
  LossSummary last_loss_;
};

extern template class Trainer<PrimEnv>;
extern template class Trainer<MeshEnv>;

/// Final-state IoU and Chamfer distance of an environment's current solid.
double final_iou(const PrimEnv& env);
double final_iou(const MeshEnv& env);
OccupancyGrid final_solid(const PrimEnv& env);
OccupancyGrid final_solid(const MeshEnv& env);

/// Greedy episode with `net`, optionally recording per-step traces.
EpisodeResult run_policy(const QNetwork<float>& net, PrimEnv& env, const Shape& task,
                         std::vector<PrimTraceRecord>* trace = nullptr);
EpisodeResult run_policy(const QNetwork<float>& net, MeshEnv& env, const MeshTask& task,
                         std::vector<MeshTraceRecord>* trace = nullptr);

/// Mesh tasks from a frozen Prim-Agent: greedy primitives, merged, the five
/// largest kept, ten loops assigned.
std::vector<MeshTask> mesh_tasks_from_prim(const QNetwork<float>& prim_net, std::span<const Shape> shapes,
                                           const PrimConfig& prim_config = {});

/// One metrics row: mean over a category's shapes.
struct MetricsRow {
  std::string scheme;
  std::string category;
  double accumulated_reward = 0.0;
  double iou = 0.0;
  double chamfer = 0.0;
  int shapes = 0;
};

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out);

/// Groups per-shape results by category (in first-appearance order).
std::vector<MetricsRow> summarize(const std::string& scheme, std::span<const Shape> shapes,
                                  std::span<const EpisodeResult> results);

/// Runs the training phases of `scheme` on an existing trainer.
template <class Env>
void train_scheme(Trainer<Env>& trainer, Scheme scheme, std::span<const typename Env::Task> tasks);

/// Trains a Prim-Agent under `scheme` on `train` shapes and evaluates it
/// greedily on `eval` shapes.
struct SchemeResult {
  Scheme scheme;
  std::vector<EpisodeResult> episodes;
  std::vector<MetricsRow> metrics;
  QNetwork<float> network;
  long updates = 0;
  bool used_self_buffer = false;
};

SchemeResult run_scheme(Scheme scheme, std::span<const Shape> train, std::span<const Shape> eval,
                        const NetworkConfig& network, const TrainConfig& config, const PrimConfig& prim = {});

}  // namespace primesh
