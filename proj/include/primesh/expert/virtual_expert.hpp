#pragma once

#include <span>
#include <vector>

#include "primesh/env/mesh_env.hpp"
#include "primesh/env/prim_env.hpp"
#include "primesh/replay/experience.hpp"

namespace primesh {

/// Greedy one-step choice for the primitive selected by the step mask.
/// Deletes are only candidates in the second half of the episode. Ties go
/// to the lowest action index.
int expert_action(const PrimEnv& env);

/// Greedy one-step choice among the 36 actions of the masked loop.
/// Candidates are scored by applying and rolling back, hence non-const.
int expert_action(MeshEnv& env);

/// Whether deletes are expert candidates at `step`.
inline bool expert_may_delete(int step, int episode_steps) { return 2 * step >= episode_steps; }

/// Plays one full episode of `task` under the expert and returns every
/// transition, flagged as demonstration data.
template <class Env>
std::vector<Experience> expert_rollout(Env& env, const typename Env::Task& task) {
  std::vector<Experience> out;
  env.reset(task);
  while (!env.done()) {
    Experience e;
    e.observation = env.observe();
    e.action = expert_action(env);
    const StepResult r = env.step(e.action);
    e.reward = r.reward;
    e.done = r.done;
    e.next_observation = env.observe();
    e.is_demo = true;
    out.push_back(std::move(e));
  }
  return out;
}

template <class Env>
std::vector<Experience> generate_demonstrations(Env& env, std::span<const typename Env::Task> tasks) {
  std::vector<Experience> out;
  for (const auto& task : tasks) {
    auto episode = expert_rollout(env, task);
    out.insert(out.end(), std::make_move_iterator(episode.begin()), std::make_move_iterator(episode.end()));
  }
  return out;
}

}  // namespace primesh
