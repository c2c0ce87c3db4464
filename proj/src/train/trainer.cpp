#include "primesh/train/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "primesh/geometry/chamfer.hpp"

namespace primesh {

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : kAllSchemes)
    if (scheme_name(s) == name) return s;
  throw ContractViolation("unknown scheme '" + name +
                          "' (expected ddqn_only, dagger_only, dqfd_style, dagger_star or full)");
}

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kDdqnOnly: return "ddqn_only";
    case Scheme::kDaggerOnly: return "dagger_only";
    case Scheme::kDqfdStyle: return "dqfd_style";
    case Scheme::kDaggerStar: return "dagger_star";
    case Scheme::kFull: return "full";
  }
  return "?";
}

InputLayout prim_layout(int episode_steps) { return {kPrimCount * 6, episode_steps, kPrimActionCount}; }
InputLayout mesh_layout(int episode_steps) { return {kLoopCount * 8, episode_steps, kMeshActionCount}; }

namespace {

InputLayout layout_of(const PrimEnv& env) { return prim_layout(env.config().episode_steps); }
InputLayout layout_of(const MeshEnv& env) { return mesh_layout(env.config().episode_steps); }

}  // namespace

OccupancyGrid final_solid(const PrimEnv& env) {
  return voxelize_cuboids(env.state().cuboids, env.resolution());
}

OccupancyGrid final_solid(const MeshEnv& env) {
  return voxelize_mesh(env.state().loops, env.resolution());
}

double final_iou(const PrimEnv& env) { return env.terms().global_iou; }
double final_iou(const MeshEnv& env) { return env.iou(); }

namespace {

template <class Env>
void finish_episode(const Env& env, EpisodeResult& out) {
  out.iou = final_iou(env);
  const OccupancyGrid solid = final_solid(env);
  const OccupancyGrid& target = *env.state().target;
  out.chamfer = (solid.count() == 0 || target.count() == 0) ? std::nan("") : chamfer_distance(solid, target);
}

template <class Env, class Record, class MakeRecord>
EpisodeResult greedy_episode(const QNetwork<float>& net, Env& env, const typename Env::Task& task,
                             std::vector<Record>* trace, MakeRecord make) {
  EpisodeResult out;
  env.reset(task);
  while (!env.done()) {
    const Observation obs = env.observe();
    const int action = greedy_action<float>(net.q_values(obs), obs.legal);
    const int step = env.state().step;
    const StepResult r = env.step(action);
    out.accumulated_reward += r.reward;
    out.actions.push_back(action);
    if (trace) trace->push_back(make(step, action, r.reward, env));
  }
  finish_episode(env, out);
  return out;
}

}  // namespace

EpisodeResult run_policy(const QNetwork<float>& net, PrimEnv& env, const Shape& task,
                         std::vector<PrimTraceRecord>* trace) {
  return greedy_episode(net, env, task, trace, [](int step, int action, double reward, const PrimEnv& e) {
    return PrimTraceRecord{step, action, reward, e.terms()};
  });
}

EpisodeResult run_policy(const QNetwork<float>& net, MeshEnv& env, const MeshTask& task,
                         std::vector<MeshTraceRecord>* trace) {
  return greedy_episode(net, env, task, trace, [](int step, int action, double reward, const MeshEnv& e) {
    return MeshTraceRecord{step, action, reward, e.iou()};
  });
}

std::vector<MeshTask> mesh_tasks_from_prim(const QNetwork<float>& prim_net, std::span<const Shape> shapes,
                                           const PrimConfig& prim_config) {
  std::vector<MeshTask> out;
  PrimEnv env(prim_config);
  for (const auto& shape : shapes) {
    run_policy(prim_net, env, shape);
    const auto merged = merge_primitives(env.state().cuboids);
    if (merged.empty()) throw ContractViolation("shape " + shape.name + ": the Prim-Agent deleted every primitive");
    out.push_back(make_mesh_task(shape, merged));
  }
  return out;
}

template <class Env>
Trainer<Env>::Trainer(Env prototype, const NetworkConfig& network, const TrainConfig& config)
    : env_(std::move(prototype)),
      config_(config),
      adam_(config.learning_rate),
      demo_short_(config.demo_capacity),
      demo_long_(config.demo_capacity),
      rng_(config.seed) {
  require(config.batch_size > 0 && config.batch_size % 2 == 0, "train: batch size must be positive and even");
  require(config.target_sync_interval > 0, "train: target sync interval must be positive");
  require(config.dagger_iterations >= 1, "train: at least one DAgger iteration is required");
  require(config.rl_update_interval >= 1, "train: rl update interval must be positive");
  const InputLayout layout = layout_of(env_);
  pair_.current = QNetwork<float>(network, layout);
  pair_.current.initialize(config.seed * 7919 + 17);
  pair_.target = pair_.current;
}

template <class Env>
void Trainer<Env>::update(std::span<const Experience* const> batch, Loss loss) {
  LossResult<float> r;
  switch (loss) {
    case Loss::kCombined: r = combined_loss(pair_, batch, config_.loss); break;
    case Loss::kMargin: r = margin_loss(pair_.current, batch, config_.loss); break;
    case Loss::kTd: r = td_loss(pair_, batch, config_.loss); break;
  }
  last_loss_ = {r.loss, r.td, r.margin};
  adam_.step(pair_.current.parameters(), r.grad);
  ++updates_;
  if (updates_ % config_.target_sync_interval == 0) pair_.sync();
}

template <class Env>
std::vector<Experience> Trainer<Env>::relabeled_rollout(const Task& task) {
  // States come from the greedy learner; each is stored with the expert's
  // action, whose reward and successor are taken from a copy of the env.
  std::vector<Experience> out;
  env_.reset(task);
  while (!env_.done()) {
    Experience e;
    e.observation = env_.observe();
    Env probe = env_;
    e.action = expert_action(probe);
    const StepResult r = probe.step(e.action);
    e.reward = r.reward;
    e.done = r.done;
    e.next_observation = probe.observe();
    e.is_demo = true;
    const int own = greedy_action<float>(pair_.current.q_values(e.observation), e.observation.legal);
    out.push_back(std::move(e));
    env_.step(own);
  }
  return out;
}

template <class Env>
void Trainer<Env>::run_il(std::span<const Task> tasks, const IlOptions& options) {
  require(!tasks.empty(), "run_il: no shapes");
  adam_.set_learning_rate(config_.learning_rate);
  const Loss loss = options.supervised_only ? Loss::kMargin : Loss::kCombined;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto demos = expert_rollout(env_, tasks[t]);
    demo_short_.clear();
    for (const auto& e : demos) {
      demo_short_.push(e);
      demo_long_.push(e);
    }
    std::vector<Experience> relabeled;
    for (int k = 1; k <= config_.dagger_iterations; ++k) {
      for (int u = 0; u < config_.updates_per_iteration; ++u) {
        const auto batch = options.double_buffer ? sample_equal(demo_short_, demo_long_, config_.batch_size, rng_)
                                                 : sample_uniform(demo_long_, config_.batch_size, rng_);
        update(batch, loss);
      }
      if (options.relabel) {
        relabeled = relabeled_rollout(tasks[t]);
        demo_short_.clear();
        for (const auto& e : relabeled) {
          demo_long_.push(e);
          demo_short_.push(e);
        }
      }
      if (on_iteration) on_iteration({t, k, &relabeled, &demo_short_, &demo_long_, updates_});
    }
  }
}

template <class Env>
void Trainer<Env>::run_rl(std::span<const Task> tasks) {
  require(!tasks.empty(), "run_rl: no shapes");
  adam_.set_learning_rate(config_.rl_learning_rate);
  if (!self_) self_.emplace(config_.self_capacity);
  ReplayBuffer& self = *self_;
  long steps = 0;
  for (int episode = 0; episode < config_.rl_episodes; ++episode) {
    for (const auto& task : tasks) {
      env_.reset(task);
      while (!env_.done()) {
        Experience e;
        e.observation = env_.observe();
        e.action = select_action(pair_.current, e.observation, config_.epsilon, rng_);
        const StepResult r = env_.step(e.action);
        e.reward = r.reward;
        e.done = r.done;
        e.next_observation = env_.observe();
        self.push(std::move(e));
        if (self.size() < static_cast<std::size_t>(config_.rl_warmup) || ++steps % config_.rl_update_interval != 0)
          continue;
        const auto batch = demo_long_.empty() ? sample_uniform(self, config_.batch_size, rng_)
                                              : sample_equal(self, demo_long_, config_.batch_size, rng_);
        update(batch, Loss::kTd);
      }
    }
  }
}

template <class Env>
EpisodeResult Trainer<Env>::evaluate(const Task& task) const {
  Env env = env_;
  return run_policy(pair_.current, env, task);
}

template <class Env>
double Trainer<Env>::agreement(std::span<const Experience> records) const {
  require(!records.empty(), "agreement: no records");
  int hits = 0;
  for (const auto& e : records)
    hits += greedy_action<float>(pair_.current.q_values(e.observation), e.observation.legal) == e.action ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

template class Trainer<PrimEnv>;
template class Trainer<MeshEnv>;

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out) {
  out << "mode,category,accumulated_reward,iou,chamfer\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : rows)
    out << r.scheme << ',' << r.category << ',' << r.accumulated_reward << ',' << r.iou << ',' << r.chamfer << '\n';
}

std::vector<MetricsRow> summarize(const std::string& scheme, std::span<const Shape> shapes,
                                  std::span<const EpisodeResult> results) {
  require(shapes.size() == results.size(), "summarize: shapes and results differ in length");
  std::vector<MetricsRow> rows;
  std::vector<int> chamfer_counts;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const MetricsRow& r) { return r.category == shapes[i].category; });
    if (it == rows.end()) {
      rows.push_back({scheme, shapes[i].category, 0.0, 0.0, 0.0, 0});
      chamfer_counts.push_back(0);
      it = rows.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - rows.begin());
    it->accumulated_reward += results[i].accumulated_reward;
    it->iou += results[i].iou;
    ++it->shapes;
    // A fully deleted result has no surface; it is left out of the Chamfer mean.
    if (std::isfinite(results[i].chamfer)) {
      it->chamfer += results[i].chamfer;
      ++chamfer_counts[k];
    }
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].accumulated_reward /= rows[k].shapes;
    rows[k].iou /= rows[k].shapes;
    rows[k].chamfer = chamfer_counts[k] ? rows[k].chamfer / chamfer_counts[k] : std::nan("");
  }
  return rows;
}

template <class Env>
void train_scheme(Trainer<Env>& trainer, Scheme scheme, std::span<const typename Env::Task> tasks) {
  switch (scheme) {
    case Scheme::kDdqnOnly:
      trainer.run_rl(tasks);
      break;
    case Scheme::kDaggerOnly:
      trainer.run_il(tasks, {.relabel = true, .double_buffer = false, .supervised_only = true});
      break;
    case Scheme::kDqfdStyle:
      trainer.run_il(tasks, {.relabel = false, .double_buffer = false, .supervised_only = false});
      trainer.run_rl(tasks);
      break;
    case Scheme::kDaggerStar:
      trainer.run_il(tasks);
      break;
    case Scheme::kFull:
      trainer.run_il(tasks);
      trainer.run_rl(tasks);
      break;
  }
}

template void train_scheme(Trainer<PrimEnv>&, Scheme, std::span<const Shape>);
template void train_scheme(Trainer<MeshEnv>&, Scheme, std::span<const MeshTask>);

SchemeResult run_scheme(Scheme scheme, std::span<const Shape> train, std::span<const Shape> eval,
                        const NetworkConfig& network, const TrainConfig& config, const PrimConfig& prim) {
  Trainer<PrimEnv> trainer{PrimEnv(prim), network, config};
  train_scheme(trainer, scheme, train);
  SchemeResult out{scheme, {}, {}, trainer.networks().current, trainer.updates(), trainer.self_buffer() != nullptr};
  for (const auto& shape : eval) out.episodes.push_back(trainer.evaluate(shape));
  out.metrics = summarize(scheme_name(scheme), eval, out.episodes);
  return out;
}

}  // namespace primesh
