#pragma once

#include <span>

#include "primesh/nn/qnetwork.hpp"
#include "primesh/replay/experience.hpp"

namespace primesh {

struct LossConfig {
  double gamma = 0.9;   // discount
  double margin = 0.8;  // expert margin for a != a_E
  double lambda = 1.0;  // weight of the margin term in the combined loss
};

template <class S>
struct LossResult {
  double loss = 0.0;
  double td = 0.0;      // TD part (0 when not computed)
  double margin = 0.0;  // unweighted margin part (0 when not computed)
  typename QNetwork<S>::Vector grad;  // gradient with respect to the current network
};

/// Mean squared double-DQN TD error. The bootstrap action is the current
/// network's legal argmax at the next state, valued by the target network;
/// terminal records drop the bootstrap term. No gradient flows into the target.
template <class S>
LossResult<S> td_loss(const DDQNPair<S>& pair, std::span<const Experience* const> batch, const LossConfig& config);

/// Mean over records of max over legal a of (Q(s,a) + l(a)) - Q(s,a_E).
/// Throws ContractViolation if any record is not a demonstration.
template <class S>
LossResult<S> margin_loss(const QNetwork<S>& net, std::span<const Experience* const> batch, const LossConfig& config);

/// TD loss over the whole batch plus lambda times the margin loss over the
/// batch's demonstration records.
template <class S>
LossResult<S> combined_loss(const DDQNPair<S>& pair, std::span<const Experience* const> batch,
                            const LossConfig& config);

}  // namespace primesh
