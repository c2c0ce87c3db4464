#include "primesh/env/prim_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <iomanip>
#include <ostream>
#include <string>

namespace primesh {

PrimAction decode_prim_action(int index) {
  if (index < 0 || index >= kPrimActionCount)
    throw ContractViolation("prim action index out of range: " + std::to_string(index));
  PrimAction a;
  a.primitive = index / kPrimActionsPerPrimitive;
  const int local = index % kPrimActionsPerPrimitive;
  if (local >= 24) {
    a.kind = PrimActionKind::kDelete;
    a.axis = -1;
    a.amount = kPrimAmounts[static_cast<std::size_t>(local - 24)];
    return a;
  }
  a.kind = local < 12 ? PrimActionKind::kDragV : PrimActionKind::kDragVPrime;
  a.axis = (local % 12) / 4;
  a.amount = kPrimAmounts[static_cast<std::size_t>(local % 4)];
  return a;
}

int encode_prim_action(const PrimAction& action) {
  require(action.primitive >= 0 && action.primitive < kPrimCount, "prim action: primitive out of range");
  const auto it = std::find(kPrimAmounts.begin(), kPrimAmounts.end(), action.amount);
  require(it != kPrimAmounts.end(), "prim action: amount must be one of -2,-1,1,2");
  const int rank = static_cast<int>(it - kPrimAmounts.begin());
  int local = 0;
  if (action.kind == PrimActionKind::kDelete) {
    local = 24 + rank;
  } else {
    require(action.axis >= 0 && action.axis < 3, "prim action: axis out of range");
    const int corner = action.kind == PrimActionKind::kDragV ? 0 : 1;
    local = corner * 12 + action.axis * 4 + rank;
  }
  return action.primitive * kPrimActionsPerPrimitive + local;
}

double prim_reward(const PrimTerms& before, const PrimTerms& after, const PrimConfig& config) {
  return (after.global_iou - before.global_iou) + config.alpha_local * (after.local_iou - before.local_iou) +
         config.alpha_parsimony * static_cast<double>(after.deleted - before.deleted);
}

std::array<Cuboid, kPrimCount> initial_cuboids(int resolution) {
  const double cell = resolution / 3.0;
  const int edge = std::max(1, static_cast<int>(std::lround(cell / 2.0)));
  std::array<int, 3> starts{};
  for (int i = 0; i < 3; ++i) {
    const double center = (i + 0.5) * cell;
    starts[static_cast<std::size_t>(i)] =
        std::clamp(static_cast<int>(std::lround(center - edge / 2.0)), 0, resolution - edge);
  }
  std::array<Cuboid, kPrimCount> cuboids{};
  for (int iz = 0; iz < 3; ++iz)
    for (int iy = 0; iy < 3; ++iy)
      for (int ix = 0; ix < 3; ++ix) {
        Cuboid& c = cuboids[static_cast<std::size_t>(ix + 3 * iy + 9 * iz)];
        c.v = {starts[ix], starts[iy], starts[iz]};
        c.v_prime = {c.v[0] + edge, c.v[1] + edge, c.v[2] + edge};
      }
  return cuboids;
}

Cuboid apply_drag(const Cuboid& cuboid, PrimActionKind kind, int axis, int amount, int resolution) {
  Cuboid out = cuboid;
  if (cuboid.deleted) return out;
  const auto a = static_cast<std::size_t>(axis);
  if (kind == PrimActionKind::kDragV) {
    out.v[a] = std::clamp(cuboid.v[a] + amount, 0, cuboid.v_prime[a] - 1);
  } else {
    out.v_prime[a] = std::clamp(cuboid.v_prime[a] + amount, cuboid.v[a] + 1, resolution);
  }
  return out;
}

void PrimEnv::reset(const Shape& shape) {
  require(shape.target != nullptr && shape.reference != nullptr, "PrimEnv::reset: shape is incomplete");
  resolution_ = shape.resolution();
  state_.reference = shape.reference;
  state_.target = shape.target;
  state_.cuboids = initial_cuboids(resolution_);
  state_.step = 0;
  done_ = false;
  target_table_ = std::make_shared<const VolumeTable>(*shape.target);
  coverage_ = CoverageGrid(*shape.target);
  for (std::size_t i = 0; i < state_.cuboids.size(); ++i) {
    coverage_.add(state_.cuboids[i].box());
    primitive_iou_[i] = per_primitive_iou(state_.cuboids[i], *target_table_);
  }
  terms_.global_iou = coverage_.iou();
  terms_.deleted = 0;
  terms_.local_iou = local_iou(-1, Cuboid{}, 0.0);
}

double PrimEnv::local_iou(int replaced, const Cuboid& with, double with_iou) const {
  // Summation order is fixed (by index) so previews and steps agree bit for bit.
  double sum = 0.0;
  int live = 0;
  for (int i = 0; i < kPrimCount; ++i) {
    const bool is_replaced = i == replaced;
    const Cuboid& c = is_replaced ? with : state_.cuboids[static_cast<std::size_t>(i)];
    if (c.deleted) continue;
    sum += is_replaced ? with_iou : primitive_iou_[static_cast<std::size_t>(i)];
    ++live;
  }
  return live == 0 ? 0.0 : sum / live;
}

PrimEnv::Candidate PrimEnv::evaluate(int action) const {
  const PrimAction a = decode_prim_action(action);
  const Cuboid& current = state_.cuboids[static_cast<std::size_t>(a.primitive)];
  Candidate out;
  if (a.kind == PrimActionKind::kDelete) {
    out.next = current;
    out.next.deleted = true;
  } else {
    out.next = apply_drag(current, a.kind, a.axis, a.amount, resolution_);
  }
  if (out.next == current) {
    out.terms = terms_;
    out.tally = coverage_.tally();
    out.primitive_iou = primitive_iou_[static_cast<std::size_t>(a.primitive)];
    return out;
  }
  out.tally = coverage_.preview_replace(current.box(), out.next.box());
  out.primitive_iou = out.next.deleted ? 0.0 : per_primitive_iou(out.next, *target_table_);
  out.terms.global_iou = coverage_.iou(out.tally);
  out.terms.deleted = terms_.deleted + (out.next.deleted && !current.deleted ? 1 : 0);
  out.terms.local_iou = local_iou(a.primitive, out.next, out.primitive_iou);
  return out;
}

double PrimEnv::preview_reward(int action) const {
  require(!done_, "PrimEnv: episode is over");
  if (!legal_actions().contains(action)) throw ContractViolation("PrimEnv: illegal action " + std::to_string(action));
  const Candidate c = evaluate(action);
  if (c.terms.deleted == kPrimCount) return config_.all_deleted_reward;
  if (c.next == state_.cuboids[static_cast<std::size_t>(action / kPrimActionsPerPrimitive)]) return 0.0;
  return prim_reward(terms_, c.terms, config_);
}

StepResult PrimEnv::step(int action) {
  require(!done_, "PrimEnv: episode is over");
  if (!legal_actions().contains(action)) throw ContractViolation("PrimEnv: illegal action " + std::to_string(action));
  const int primitive = action / kPrimActionsPerPrimitive;
  Cuboid& current = state_.cuboids[static_cast<std::size_t>(primitive)];
  const Candidate c = evaluate(action);
  StepResult result;
  if (!(c.next == current)) {
    result.reward = prim_reward(terms_, c.terms, config_);
    coverage_.replace(current.box(), c.next.box());
    current = c.next;
    primitive_iou_[static_cast<std::size_t>(primitive)] = c.primitive_iou;
    terms_ = c.terms;
  }
  ++state_.step;
  if (terms_.deleted == kPrimCount) {
    result.reward = config_.all_deleted_reward;
    done_ = true;
  }
  if (state_.step >= config_.episode_steps) done_ = true;
  result.done = done_;
  return result;
}

ActionRange PrimEnv::legal_actions() const {
  const int slot = state_.step % kPrimCount;
  return {slot * kPrimActionsPerPrimitive, (slot + 1) * kPrimActionsPerPrimitive};
}

std::vector<bool> PrimEnv::legal_mask() const {
  Observation o;
  o.legal = legal_actions();
  return o.mask(kActionCount);
}

std::vector<float> prim_features(const PrimState& state, int resolution, int episode_steps) {
  std::vector<float> f(kPrimCount * 6 + static_cast<std::size_t>(episode_steps), 0.0F);
  const auto r = static_cast<float>(resolution);
  for (std::size_t i = 0; i < state.cuboids.size(); ++i) {
    const Cuboid& c = state.cuboids[i];
    if (c.deleted) continue;
    for (std::size_t a = 0; a < 3; ++a) {
      f[6 * i + a] = static_cast<float>(c.v[a]) / r;
      f[6 * i + 3 + a] = static_cast<float>(c.v_prime[a]) / r;
    }
  }
  if (state.step < episode_steps) f[kPrimCount * 6 + static_cast<std::size_t>(state.step)] = 1.0F;
  return f;
}

Observation PrimEnv::observe() const {
  Observation o;
  o.reference = state_.reference;
  o.features = prim_features(state_, resolution_, config_.episode_steps);
  o.legal = legal_actions();
  return o;
}

PrimTerms recompute_prim_terms(const std::array<Cuboid, kPrimCount>& cuboids, const OccupancyGrid& target) {
  PrimTerms t;
  t.global_iou = iou(voxelize_cuboids(cuboids, target.resolution()), target);
  double sum = 0.0;
  int live = 0;
  for (const auto& c : cuboids) {
    if (c.deleted) {
      ++t.deleted;
      continue;
    }
    sum += per_primitive_iou(c, target);
    ++live;
  }
  t.local_iou = live == 0 ? 0.0 : sum / live;
  return t;
}

std::vector<Cuboid> merge_primitives(std::span<const Cuboid> cuboids, std::span<const double> thresholds) {
  std::vector<Cuboid> current;
  for (const auto& c : cuboids)
    if (!c.deleted) current.push_back(c);

  for (const double threshold : thresholds) {
    const std::size_t n = current.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const Box& a = current[i].box();
        const Box& b = current[j].box();
        Box joint;
        for (int ax = 0; ax < 3; ++ax) {
          joint.lo[ax] = std::min(a.lo[ax], b.lo[ax]);
          joint.hi[ax] = std::max(a.hi[ax], b.hi[ax]);
        }
        // The union lies inside the joint box, so IoU(union, joint) = |union| / |joint|.
        const std::int64_t uni = a.volume() + b.volume() - intersect(a, b).volume();
        if (static_cast<double>(uni) >= threshold * static_cast<double>(joint.volume())) {
          const std::size_t ri = find(i);
          const std::size_t rj = find(j);
          if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
        }
      }
    // Components keep the position of their lowest-index member.
    std::vector<Cuboid> merged;
    std::vector<int> slot(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t root = find(i);
      if (slot[root] < 0) {
        slot[root] = static_cast<int>(merged.size());
        merged.push_back(current[i]);
        continue;
      }
      Cuboid& m = merged[static_cast<std::size_t>(slot[root])];
      for (std::size_t ax = 0; ax < 3; ++ax) {
        m.v[ax] = std::min(m.v[ax], current[i].v[ax]);
        m.v_prime[ax] = std::max(m.v_prime[ax], current[i].v_prime[ax]);
      }
    }
    current = std::move(merged);
  }
  return current;
}

void write_prim_trace(std::span<const PrimTraceRecord> records, std::ostream& out) {
  out << "step\taction\treward\tglobal_iou\tlocal_iou\tdeleted\n";
  out << std::setprecision(12);
  for (const auto& r : records)
    out << r.step << '\t' << r.action << '\t' << r.reward << '\t' << r.terms.global_iou << '\t'
        << r.terms.local_iou << '\t' << r.terms.deleted << '\n';
}

}  // namespace primesh
