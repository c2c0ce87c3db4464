#include "primesh/expert/virtual_expert.hpp"

namespace primesh {

int expert_action(const PrimEnv& env) {
  require(!env.done(), "expert: episode is over");
  const ActionRange legal = env.legal_actions();
  const bool may_delete = expert_may_delete(env.state().step, env.config().episode_steps);
  int best = legal.begin;
  double best_reward = env.preview_reward(best);
  for (int a = legal.begin + 1; a < legal.end; ++a) {
    if (!may_delete && decode_prim_action(a).kind == PrimActionKind::kDelete) continue;
    const double r = env.preview_reward(a);
    if (r > best_reward) {
      best = a;
      best_reward = r;
    }
  }
  return best;
}

int expert_action(MeshEnv& env) {
  require(!env.done(), "expert: episode is over");
  const ActionRange legal = env.legal_actions();
  int best = legal.begin;
  double best_reward = env.preview_reward(best);
  for (int a = legal.begin + 1; a < legal.end; ++a) {
    const double r = env.preview_reward(a);
    if (r > best_reward) {
      best = a;
      best_reward = r;
    }
  }
  return best;
}

}  // namespace primesh
