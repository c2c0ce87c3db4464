#include "primesh/env/mesh_env.hpp"

#include <algorithm>
#include <numeric>
#include <iomanip>
#include <ostream>
#include <string>

namespace primesh {

MeshAction decode_mesh_action(int index) {
  if (index < 0 || index >= kMeshActionCount)
    throw ContractViolation("mesh action index out of range: " + std::to_string(index));
  MeshAction a;
  a.loop = index / kMeshActionsPerLoop;
  const int local = index % kMeshActionsPerLoop;
  a.corner = local / 18;
  a.axis = (local % 18) / 6;
  a.amount = kMeshAmounts[static_cast<std::size_t>(local % 6)];
  return a;
}

int encode_mesh_action(const MeshAction& action) {
  require(action.loop >= 0 && action.loop < kLoopCount, "mesh action: loop out of range");
  require(action.corner == 0 || action.corner == 1, "mesh action: corner must be 0 or 1");
  require(action.axis >= 0 && action.axis < 3, "mesh action: axis out of range");
  const auto it = std::find(kMeshAmounts.begin(), kMeshAmounts.end(), action.amount);
  require(it != kMeshAmounts.end(), "mesh action: amount must be one of -3..3 excluding 0");
  return action.loop * kMeshActionsPerLoop + action.corner * 18 + action.axis * 6 +
         static_cast<int>(it - kMeshAmounts.begin());
}

std::vector<int> loop_allocation(std::span<const Cuboid> live, int loop_count) {
  const auto m = static_cast<int>(live.size());
  require(m >= 1, "loop assignment: no live primitive");
  require(loop_count >= 2 * m, "loop assignment: " + std::to_string(loop_count) + " loops cannot give " +
                                   std::to_string(m) + " primitives two each");
  std::int64_t total = 0;
  for (const auto& c : live) total += c.volume();
  std::vector<int> counts(static_cast<std::size_t>(m), 0);
  int allocated = 0;
  for (int k = 0; k + 1 < m; ++k) {
    // ceil(n V / S + 1/2) = ceil((2 n V + S) / (2 S)), evaluated exactly.
    const std::int64_t num = 2 * std::int64_t{loop_count} * live[static_cast<std::size_t>(k)].volume() + total;
    const std::int64_t share = (num + 2 * total - 1) / (2 * total);
    int e = static_cast<int>(std::max<std::int64_t>(share, 2));
    // Rounding up can overdraw; keep two loops for each primitive still to come.
    e = std::min(e, loop_count - allocated - 2 * (m - 1 - k));
    counts[static_cast<std::size_t>(k)] = e;
    allocated += e;
  }
  counts.back() = loop_count - allocated;
  return counts;
}

std::vector<EdgeLoop> assign_edge_loops(std::span<const Cuboid> cuboids, int loop_count) {
  std::vector<Cuboid> live;
  for (const auto& c : cuboids)
    if (!c.deleted) live.push_back(c);
  const auto counts = loop_allocation(live, loop_count);
  std::vector<EdgeLoop> loops;
  for (std::size_t k = 0; k < live.size(); ++k) {
    const Cuboid& c = live[k];
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (c.v_prime[a] - c.v[a] > c.v_prime[axis] - c.v[axis]) axis = a;
    const int length = c.v_prime[axis] - c.v[axis];
    const int e = counts[k];
    for (int j = 0; j < e; ++j) {
      // Round j * L / (e - 1) to nearest, halves up.
      const int offset = (2 * j * length + (e - 1)) / (2 * (e - 1));
      EdgeLoop loop{axis, c.v, c.v_prime, static_cast<int>(k)};
      loop.lo[axis] = loop.hi[axis] = c.v[axis] + offset;
      loops.push_back(loop);
    }
  }
  return canonical_sort(loops);
}

std::vector<Cuboid> largest_primitives(std::span<const Cuboid> cuboids, int max_count) {
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < cuboids.size(); ++i)
    if (!cuboids[i].deleted) live.push_back(i);
  if (static_cast<int>(live.size()) > max_count) {
    std::stable_sort(live.begin(), live.end(),
                     [&](std::size_t a, std::size_t b) { return cuboids[a].volume() > cuboids[b].volume(); });
    live.resize(static_cast<std::size_t>(max_count));
    std::sort(live.begin(), live.end());
  }
  std::vector<Cuboid> out;
  for (auto i : live) out.push_back(cuboids[i]);
  return out;
}

std::vector<EdgeLoop> canonical_sort(std::span<const EdgeLoop> loops) {
  std::vector<EdgeLoop> out(loops.begin(), loops.end());
  std::stable_sort(out.begin(), out.end(), [](const EdgeLoop& a, const EdgeLoop& b) {
    if (a.owner != b.owner) return a.owner < b.owner;
    return a.position() < b.position();
  });
  return out;
}

MeshTask make_mesh_task(const Shape& shape, std::span<const Cuboid> primitives) {
  MeshTask task;
  task.shape = shape;
  task.loops = assign_edge_loops(largest_primitives(primitives, kLoopCount / 2), kLoopCount);
  return task;
}

void MeshEnv::reset(const MeshTask& task) {
  require(task.shape.target != nullptr && task.shape.reference != nullptr, "MeshEnv::reset: shape is incomplete");
  require(task.loops.size() == kLoopCount, "MeshEnv::reset: expected exactly 10 edge loops");
  resolution_ = task.shape.resolution();
  state_.reference = task.shape.reference;
  state_.target = task.shape.target;
  const auto sorted = canonical_sort(task.loops);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    require(sorted[i].valid(resolution_), "MeshEnv::reset: invalid edge loop");
    state_.loops[i] = sorted[i];
  }
  state_.step = 0;
  done_ = false;
  coverage_ = CoverageGrid(*task.shape.target);
  for (const auto& group : group_by_owner(state_.loops))
    for (const auto& box : loft_slab_boxes(group, resolution_, 0, resolution_)) coverage_.add(box);
}

std::vector<EdgeLoop> MeshEnv::owner_loops(int owner) const {
  std::vector<EdgeLoop> out;
  for (const auto& l : state_.loops)
    if (l.owner == owner) out.push_back(l);
  return out;
}

EdgeLoop MeshEnv::moved(int action) const {
  const MeshAction a = decode_mesh_action(action);
  const auto index = static_cast<std::size_t>(a.loop);
  EdgeLoop loop = state_.loops[index];
  const auto ax = static_cast<std::size_t>(a.axis);
  if (a.axis == loop.axis) {
    int lower = 0;
    int upper = resolution_;
    if (index > 0 && state_.loops[index - 1].owner == loop.owner) lower = state_.loops[index - 1].position();
    if (index + 1 < state_.loops.size() && state_.loops[index + 1].owner == loop.owner)
      upper = state_.loops[index + 1].position();
    const int p = std::clamp(loop.position() + a.amount, lower, upper);
    loop.lo[ax] = p;
    loop.hi[ax] = p;
  } else if (a.corner == 0) {
    loop.lo[ax] = std::clamp(loop.lo[ax] + a.amount, 0, loop.hi[ax]);
  } else {
    loop.hi[ax] = std::clamp(loop.hi[ax] + a.amount, loop.lo[ax], resolution_);
  }
  return loop;
}

void MeshEnv::replace_loop(int index, const EdgeLoop& next) {
  const auto i = static_cast<std::size_t>(index);
  const EdgeLoop& old = state_.loops[i];
  // Slabs between the neighbouring loops (or the moved extent at an end) change.
  int begin = std::min(old.position(), next.position());
  int end = std::max(old.position(), next.position());
  if (i > 0 && state_.loops[i - 1].owner == old.owner) begin = state_.loops[i - 1].position();
  if (i + 1 < state_.loops.size() && state_.loops[i + 1].owner == old.owner) end = state_.loops[i + 1].position();
  const auto before = owner_loops(old.owner);
  for (const auto& box : loft_slab_boxes(before, resolution_, begin, end)) coverage_.remove(box);
  state_.loops[i] = next;
  const auto after = owner_loops(next.owner);
  for (const auto& box : loft_slab_boxes(after, resolution_, begin, end)) coverage_.add(box);
}

double MeshEnv::preview_reward(int action) {
  require(!done_, "MeshEnv: episode is over");
  if (!legal_actions().contains(action)) throw ContractViolation("MeshEnv: illegal action " + std::to_string(action));
  const int index = action / kMeshActionsPerLoop;
  const EdgeLoop next = moved(action);
  const EdgeLoop old = state_.loops[static_cast<std::size_t>(index)];
  if (next == old) return 0.0;
  const double before = coverage_.iou();
  replace_loop(index, next);
  const double after = coverage_.iou();
  replace_loop(index, old);
  return after - before;
}

StepResult MeshEnv::step(int action) {
  require(!done_, "MeshEnv: episode is over");
  if (!legal_actions().contains(action)) throw ContractViolation("MeshEnv: illegal action " + std::to_string(action));
  const int index = action / kMeshActionsPerLoop;
  const EdgeLoop next = moved(action);
  StepResult result;
  if (!(next == state_.loops[static_cast<std::size_t>(index)])) {
    const double before = coverage_.iou();
    replace_loop(index, next);
    result.reward = coverage_.iou() - before;
  }
  ++state_.step;
  if (state_.step >= config_.episode_steps) done_ = true;
  result.done = done_;
  return result;
}

ActionRange MeshEnv::legal_actions() const {
  const int slot = state_.step % kLoopCount;
  return {slot * kMeshActionsPerLoop, (slot + 1) * kMeshActionsPerLoop};
}

std::vector<bool> MeshEnv::legal_mask() const {
  Observation o;
  o.legal = legal_actions();
  return o.mask(kActionCount);
}

std::vector<float> mesh_features(const MeshState& state, int resolution, int episode_steps) {
  std::vector<float> f(kLoopCount * 8 + static_cast<std::size_t>(episode_steps), 0.0F);
  const auto r = static_cast<float>(resolution);
  for (std::size_t i = 0; i < state.loops.size(); ++i) {
    const EdgeLoop& l = state.loops[i];
    for (std::size_t a = 0; a < 3; ++a) {
      f[8 * i + a] = static_cast<float>(l.lo[a]) / r;
      f[8 * i + 4 + a] = static_cast<float>(l.hi[a]) / r;
    }
    f[8 * i + 3] = static_cast<float>(l.axis);
    f[8 * i + 7] = static_cast<float>(l.axis);
  }
  if (state.step < episode_steps) f[kLoopCount * 8 + static_cast<std::size_t>(state.step)] = 1.0F;
  return f;
}

Observation MeshEnv::observe() const {
  Observation o;
  o.reference = state_.reference;
  o.features = mesh_features(state_, resolution_, config_.episode_steps);
  o.legal = legal_actions();
  return o;
}

void write_mesh_trace(std::span<const MeshTraceRecord> records, std::ostream& out) {
  out << "step\taction\treward\tiou\n";
  out << std::setprecision(12);
  for (const auto& r : records) out << r.step << '\t' << r.action << '\t' << r.reward << '\t' << r.iou << '\n';
}

}  // namespace primesh
