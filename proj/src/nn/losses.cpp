#include "primesh/nn/losses.hpp"

namespace primesh {
namespace {

template <class S>
using Matrix = typename QNetwork<S>::Matrix;

// TD contribution to the loss and to dL/dQ(s, .). Returns the mean loss.
template <class S>
double add_td(const DDQNPair<S>& pair, std::span<const Experience* const> batch, const Matrix<S>& q,
              const LossConfig& config, Matrix<S>& d_q) {
  std::vector<const Observation*> next;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->done) continue;
    next.push_back(&batch[i]->next_observation);
    rows.push_back(i);
  }
  Matrix<S> q_next_current, q_next_target;
  if (!next.empty()) {
    q_next_current = pair.current.forward(next);
    q_next_target = pair.target.forward(next);
  }
  const double n = static_cast<double>(batch.size());
  double total = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Experience& e = *batch[i];
    double y = e.reward;
    if (k < rows.size() && rows[k] == i) {
      const auto col = static_cast<Eigen::Index>(k);
      const int best = greedy_action<S>(q_next_current.col(col), e.next_observation.legal);
      y += config.gamma * static_cast<double>(q_next_target(best, col));
      ++k;
    }
    const double diff = y - static_cast<double>(q(e.action, static_cast<Eigen::Index>(i)));
    total += diff * diff;
    d_q(e.action, static_cast<Eigen::Index>(i)) += static_cast<S>(-2.0 * diff / n);
  }
  return total / n;
}

// Margin contribution over the records flagged in `use`, scaled by `weight`.
template <class S>
double add_margin(std::span<const Experience* const> batch, const std::vector<bool>& use, const Matrix<S>& q,
                  const LossConfig& config, double weight, Matrix<S>& d_q) {
  std::size_t count = 0;
  for (bool u : use) count += u ? 1 : 0;
  if (count == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!use[i]) continue;
    const Experience& e = *batch[i];
    const auto col = static_cast<Eigen::Index>(i);
    const ActionRange legal = e.observation.legal;
    require(legal.size() > 0, "margin loss: record has no legal action");
    int best = -1;
    double best_value = 0.0;
    for (int a = legal.begin; a < legal.end; ++a) {
      const double v = static_cast<double>(q(a, col)) + (a == e.action ? 0.0 : config.margin);
      if (best < 0 || v > best_value) {
        best = a;
        best_value = v;
      }
    }
    total += best_value - static_cast<double>(q(e.action, col));
    const double g = weight / static_cast<double>(count);
    d_q(best, col) += static_cast<S>(g);
    d_q(e.action, col) -= static_cast<S>(g);
  }
  return total / static_cast<double>(count);
}

template <class S>
std::vector<const Observation*> observations(std::span<const Experience* const> batch) {
  std::vector<const Observation*> out;
  out.reserve(batch.size());
  for (const auto* e : batch) out.push_back(&e->observation);
  return out;
}

template <class S>
void check_actions(std::span<const Experience* const> batch, int actions) {
  require(!batch.empty(), "loss: empty batch");
  for (const auto* e : batch) require(e->action >= 0 && e->action < actions, "loss: action index out of range");
}

}  // namespace

template <class S>
LossResult<S> td_loss(const DDQNPair<S>& pair, std::span<const Experience* const> batch, const LossConfig& config) {
  check_actions<S>(batch, pair.current.action_count());
  typename QNetwork<S>::Cache cache;
  const auto obs = observations<S>(batch);
  const Matrix<S> q = pair.current.forward(obs, &cache);
  Matrix<S> d_q = Matrix<S>::Zero(q.rows(), q.cols());
  LossResult<S> out;
  out.td = add_td(pair, batch, q, config, d_q);
  out.loss = out.td;
  pair.current.backward(cache, d_q, out.grad);
  return out;
}

template <class S>
LossResult<S> margin_loss(const QNetwork<S>& net, std::span<const Experience* const> batch, const LossConfig& config) {
  check_actions<S>(batch, net.action_count());
  for (const auto* e : batch) require(e->is_demo, "margin loss: record is not a demonstration");
  typename QNetwork<S>::Cache cache;
  const auto obs = observations<S>(batch);
  const Matrix<S> q = net.forward(obs, &cache);
  Matrix<S> d_q = Matrix<S>::Zero(q.rows(), q.cols());
  LossResult<S> out;
  out.margin = add_margin<S>(batch, std::vector<bool>(batch.size(), true), q, config, 1.0, d_q);
  out.loss = out.margin;
  net.backward(cache, d_q, out.grad);
  return out;
}

template <class S>
LossResult<S> combined_loss(const DDQNPair<S>& pair, std::span<const Experience* const> batch,
                            const LossConfig& config) {
  check_actions<S>(batch, pair.current.action_count());
  typename QNetwork<S>::Cache cache;
  const auto obs = observations<S>(batch);
  const Matrix<S> q = pair.current.forward(obs, &cache);
  Matrix<S> d_q = Matrix<S>::Zero(q.rows(), q.cols());
  LossResult<S> out;
  out.td = add_td(pair, batch, q, config, d_q);
  std::vector<bool> demo(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) demo[i] = batch[i]->is_demo;
  out.margin = add_margin<S>(batch, demo, q, config, config.lambda, d_q);
  out.loss = out.td + config.lambda * out.margin;
  pair.current.backward(cache, d_q, out.grad);
  return out;
}

template LossResult<float> td_loss(const DDQNPair<float>&, std::span<const Experience* const>, const LossConfig&);
template LossResult<double> td_loss(const DDQNPair<double>&, std::span<const Experience* const>, const LossConfig&);
template LossResult<float> margin_loss(const QNetwork<float>&, std::span<const Experience* const>, const LossConfig&);
template LossResult<double> margin_loss(const QNetwork<double>&, std::span<const Experience* const>,
                                        const LossConfig&);
template LossResult<float> combined_loss(const DDQNPair<float>&, std::span<const Experience* const>,
                                         const LossConfig&);
template LossResult<double> combined_loss(const DDQNPair<double>&, std::span<const Experience* const>,
                                          const LossConfig&);

}  // namespace primesh
