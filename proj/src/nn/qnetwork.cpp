#include "primesh/nn/qnetwork.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "primesh/io/binary.hpp"

namespace primesh {
namespace {

template <class M>
void relu_inplace(M& m) {
  m = m.cwiseMax(typename M::Scalar(0));
}

// Zeroes entries of `grad` where the activation was clipped.
template <class M, class A>
void relu_backward(M& grad, const A& activation) {
  grad = (activation.array() > typename M::Scalar(0)).select(grad, typename M::Scalar(0));
}

// Conv activations hold one reference per block of columns: channel rows,
// reference r's spatial positions at columns [r * positions, (r + 1) * positions).
template <class Mat, class Conv>
void im2col(const Mat& in, const Conv& c, int refs, Mat& cols) {
  const int k = c.kernel;
  const int in_pos = c.in_h * c.in_w, out_pos = c.out_h * c.out_w;
  cols.setZero(c.in_channels * k * k, out_pos * refs);
  for (int r = 0; r < refs; ++r)
    for (int ch = 0; ch < c.in_channels; ++ch)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const int row = (ch * k + ky) * k + kx;
          for (int oy = 0; oy < c.out_h; ++oy) {
            const int y = oy * c.stride + ky - c.pad;
            if (y < 0 || y >= c.in_h) continue;
            for (int ox = 0; ox < c.out_w; ++ox) {
              const int x = ox * c.stride + kx - c.pad;
              if (x < 0 || x >= c.in_w) continue;
              cols(row, r * out_pos + oy * c.out_w + ox) = in(ch, r * in_pos + y * c.in_w + x);
            }
          }
        }
}

template <class Mat, class Conv>
void col2im(const Mat& cols, const Conv& c, int refs, Mat& in) {
  const int k = c.kernel;
  const int in_pos = c.in_h * c.in_w, out_pos = c.out_h * c.out_w;
  in.setZero(c.in_channels, in_pos * refs);
  for (int r = 0; r < refs; ++r)
    for (int ch = 0; ch < c.in_channels; ++ch)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const int row = (ch * k + ky) * k + kx;
          for (int oy = 0; oy < c.out_h; ++oy) {
            const int y = oy * c.stride + ky - c.pad;
            if (y < 0 || y >= c.in_h) continue;
            for (int ox = 0; ox < c.out_w; ++ox) {
              const int x = ox * c.stride + kx - c.pad;
              if (x < 0 || x >= c.in_w) continue;
              in(ch, r * in_pos + y * c.in_w + x) += cols(row, r * out_pos + oy * c.out_w + ox);
            }
          }
        }
}

}  // namespace

template <class S>
QNetwork<S>::QNetwork(const NetworkConfig& config, const InputLayout& layout) : config_(config), layout_(layout) {
  require(config.reference_pool >= 1 && DepthMap::kSize % config.reference_pool == 0,
          "network: reference_pool must divide 128");
  require(layout.param_features > 0 && layout.step_features > 0 && layout.actions > 0,
          "network: input layout sizes must be positive");
  require(config.conv_stride >= 1, "network: conv stride must be positive");
  std::size_t offset = 0;
  auto dense = [&offset](const char* name, int out, int in) {
    require(out > 0 && in > 0, std::string("network: layer ") + name + " has a zero width");
    Dense d{name, offset, 0, out, in};
    offset += static_cast<std::size_t>(out) * in;
    d.bias = offset;
    offset += static_cast<std::size_t>(out);
    return d;
  };
  pooled_size_ = DepthMap::kSize / config.reference_pool;
  int channels = 1;
  int size = pooled_size_;
  for (int i = 0; i < 3; ++i) {
    Conv& c = conv_[static_cast<std::size_t>(i)];
    c.name = "conv" + std::to_string(i);
    c.in_channels = channels;
    c.out_channels = config.conv_channels[static_cast<std::size_t>(i)];
    c.kernel = config.conv_kernels[static_cast<std::size_t>(i)];
    require(c.out_channels > 0 && c.kernel > 0, "network: conv widths and kernels must be positive");
    c.stride = config.conv_stride;
    c.pad = c.kernel / 2;
    c.in_h = c.in_w = size;
    c.out_h = c.out_w = (size + 2 * c.pad - c.kernel) / c.stride + 1;
    require(c.out_h > 0, "network: reference too small for the conv stack");
    c.weight = offset;
    offset += static_cast<std::size_t>(c.out_channels) * c.in_channels * c.kernel * c.kernel;
    c.bias = offset;
    offset += static_cast<std::size_t>(c.out_channels);
    channels = c.out_channels;
    size = c.out_h;
  }
  conv_features_ = channels * size * size;
  param_[0] = dense("param0", config.param_hidden[0], layout.param_features);
  param_[1] = dense("param1", config.param_hidden[1], config.param_hidden[0]);
  step_ = dense("step", config.step_hidden, layout.step_features);
  head_[0] = dense("head0", config.head_hidden[0], conv_features_ + config.param_hidden[1] + config.step_hidden);
  head_[1] = dense("head1", config.head_hidden[1], config.head_hidden[0]);
  head_[2] = dense("out", layout.actions, config.head_hidden[1]);
  theta_ = Vector::Zero(static_cast<Eigen::Index>(offset));
}

template <class S>
void QNetwork<S>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t count, int fan_in, double gain) {
    const double bound = gain * std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) theta_[static_cast<Eigen::Index>(offset + i)] = static_cast<S>(u(rng));
  };
  theta_.setZero();
  for (const auto& c : conv_) {
    const int fan_in = c.in_channels * c.kernel * c.kernel;
    fill(c.weight, static_cast<std::size_t>(c.out_channels) * fan_in, fan_in, std::sqrt(6.0));
  }
  for (const Dense* d : {&param_[0], &param_[1], &step_, &head_[0], &head_[1]})
    fill(d->weight, static_cast<std::size_t>(d->out) * d->in, d->in, std::sqrt(6.0));
  fill(head_[2].weight, static_cast<std::size_t>(head_[2].out) * head_[2].in, head_[2].in, 1.0);
}

template <class S>
typename QNetwork<S>::Matrix QNetwork<S>::pooled_reference(const std::shared_ptr<const DepthMap>& map) const {
  // References are immutable and shared by every observation of a shape, so
  // pooled copies are memoized per thread. A weak pointer guards against a
  // freed raster's address being reused.
  struct Entry {
    std::weak_ptr<const DepthMap> source;
    int pool;
    Matrix pooled;
  };
  thread_local std::unordered_map<const DepthMap*, Entry> memo;
  const int p = config_.reference_pool;
  if (auto it = memo.find(map.get()); it != memo.end() && it->second.pool == p && !it->second.source.expired())
    return it->second.pooled;
  if (memo.size() >= 4096) memo.clear();

  const int n = pooled_size_;
  Matrix out = Matrix::Zero(1, n * n);
  const float* src = map->values().data();
  S* dst = out.data();
  for (int row = 0; row < DepthMap::kSize; ++row) {
    S* line = dst + (row / p) * n;
    const float* in = src + static_cast<std::ptrdiff_t>(row) * DepthMap::kSize;
    for (int col = 0; col < n; ++col) {
      float sum = 0.0F;
      for (int k = 0; k < p; ++k) sum += in[col * p + k];
      line[col] += static_cast<S>(sum);
    }
  }
  out *= S(1) / static_cast<S>(p * p);
  memo[map.get()] = Entry{map, p, out};
  return out;
}

template <class S>
void QNetwork<S>::check_batch(std::span<const Observation* const> batch) const {
  require(!batch.empty(), "network: empty batch");
  const auto n = static_cast<std::size_t>(layout_.param_features + layout_.step_features);
  for (const auto* o : batch) {
    require(o->reference != nullptr, "network: observation without a reference raster");
    if (o->features.size() != n)
      throw ContractViolation("network: observation has " + std::to_string(o->features.size()) +
                              " features, expected " + std::to_string(n));
  }
}

template <class S>
typename QNetwork<S>::Matrix QNetwork<S>::forward(std::span<const Observation* const> batch, Cache* cache) const {
  check_batch(batch);
  Cache local;
  Cache& c = cache ? *cache : local;
  const auto b = static_cast<Eigen::Index>(batch.size());
  c.references.clear();
  c.reference_of_sample.assign(batch.size(), 0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ref = batch[i]->reference;
    auto it = std::find(c.references.begin(), c.references.end(), ref);
    if (it == c.references.end()) {
      c.references.push_back(ref);
      it = c.references.end() - 1;
    }
    c.reference_of_sample[i] = static_cast<int>(it - c.references.begin());
  }

  // Convolutional stream, once per distinct reference, all references in one pass.
  const int nrefs = static_cast<int>(c.references.size());
  const int in_pos = pooled_size_ * pooled_size_;
  Matrix x(1, in_pos * nrefs);
  for (int r = 0; r < nrefs; ++r) x.middleCols(r * in_pos, in_pos) = pooled_reference(c.references[r]);
  for (std::size_t l = 0; l < 3; ++l) {
    const Conv& cv = conv_[l];
    im2col(x, cv, nrefs, c.cols[l]);
    ConstMatrixMap w(theta_.data() + cv.weight, cv.out_channels, cv.in_channels * cv.kernel * cv.kernel);
    Eigen::Map<const Vector> bias(theta_.data() + cv.bias, cv.out_channels);
    x.noalias() = w * c.cols[l];
    x.colwise() += bias;
    relu_inplace(x);
    c.conv_out[l] = x;
  }
  // Flatten channel-major: all positions of channel 0, then channel 1, ...
  const int out_pos = conv_[2].out_h * conv_[2].out_w;
  Matrix conv_features(conv_features_, nrefs);
  for (int r = 0; r < nrefs; ++r) {
    Matrix xt = x.middleCols(r * out_pos, out_pos).transpose();
    conv_features.col(r) = Eigen::Map<const Vector>(xt.data(), xt.size());
  }

  const int np = layout_.param_features;
  const int ns = layout_.step_features;
  c.params_in.resize(np, b);
  c.step_in.resize(ns, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& f = batch[static_cast<std::size_t>(i)]->features;
    for (int k = 0; k < np; ++k) c.params_in(k, i) = static_cast<S>(f[static_cast<std::size_t>(k)]);
    for (int k = 0; k < ns; ++k) c.step_in(k, i) = static_cast<S>(f[static_cast<std::size_t>(np + k)]);
  }
  auto apply = [this](const Dense& d, const Matrix& in, bool relu) {
    ConstMatrixMap w(theta_.data() + d.weight, d.out, d.in);
    Eigen::Map<const Vector> bias(theta_.data() + d.bias, d.out);
    Matrix out = w * in;
    out.colwise() += bias;
    if (relu) relu_inplace(out);
    return out;
  };
  c.param_h1 = apply(param_[0], c.params_in, true);
  c.param_h2 = apply(param_[1], c.param_h1, true);
  c.step_h = apply(step_, c.step_in, true);

  c.joined.resize(head_[0].in, b);
  for (Eigen::Index i = 0; i < b; ++i)
    c.joined.col(i).head(conv_features_) = conv_features.col(c.reference_of_sample[static_cast<std::size_t>(i)]);
  c.joined.block(conv_features_, 0, config_.param_hidden[1], b) = c.param_h2;
  c.joined.bottomRows(config_.step_hidden) = c.step_h;
  c.head_h1 = apply(head_[0], c.joined, true);
  c.head_h2 = apply(head_[1], c.head_h1, true);
  return apply(head_[2], c.head_h2, false);
}

template <class S>
typename QNetwork<S>::Vector QNetwork<S>::q_values(const Observation& obs) const {
  const Observation* batch[] = {&obs};
  return forward(batch).col(0);
}

template <class S>
void QNetwork<S>::backward(const Cache& c, const Matrix& d_q, Vector& grad) const {
  if (grad.size() != theta_.size()) grad = Vector::Zero(theta_.size());
  // Backpropagates through one dense layer; returns the input gradient.
  auto dense_back = [this, &grad](const Dense& d, const Matrix& in, const Matrix& d_out) {
    MatrixMap gw(grad.data() + d.weight, d.out, d.in);
    Eigen::Map<Vector> gb(grad.data() + d.bias, d.out);
    gw.noalias() += d_out * in.transpose();
    gb += d_out.rowwise().sum();
    ConstMatrixMap w(theta_.data() + d.weight, d.out, d.in);
    return Matrix(w.transpose() * d_out);
  };
  Matrix d = dense_back(head_[2], c.head_h2, d_q);
  relu_backward(d, c.head_h2);
  d = dense_back(head_[1], c.head_h1, d);
  relu_backward(d, c.head_h1);
  Matrix d_joined = dense_back(head_[0], c.joined, d);

  Matrix d_step = d_joined.bottomRows(config_.step_hidden);
  relu_backward(d_step, c.step_h);
  dense_back(step_, c.step_in, d_step);
  Matrix d_param = d_joined.block(conv_features_, 0, config_.param_hidden[1], d_joined.cols());
  relu_backward(d_param, c.param_h2);
  d_param = dense_back(param_[1], c.param_h1, d_param);
  relu_backward(d_param, c.param_h1);
  dense_back(param_[0], c.params_in, d_param);

  const int nrefs = static_cast<int>(c.references.size());
  Matrix d_conv = Matrix::Zero(conv_features_, nrefs);
  for (Eigen::Index i = 0; i < d_joined.cols(); ++i)
    d_conv.col(c.reference_of_sample[static_cast<std::size_t>(i)]) += d_joined.col(i).head(conv_features_);
  const Conv& last = conv_[2];
  const int out_pos = last.out_h * last.out_w;
  Matrix g(last.out_channels, out_pos * nrefs);
  for (int r = 0; r < nrefs; ++r)
    g.middleCols(r * out_pos, out_pos) =
        Eigen::Map<const Matrix>(d_conv.col(r).data(), out_pos, last.out_channels).transpose();
  for (int l = 2; l >= 0; --l) {
    const Conv& cv = conv_[static_cast<std::size_t>(l)];
    relu_backward(g, c.conv_out[static_cast<std::size_t>(l)]);
    const int kk = cv.in_channels * cv.kernel * cv.kernel;
    MatrixMap gw(grad.data() + cv.weight, cv.out_channels, kk);
    Eigen::Map<Vector> gb(grad.data() + cv.bias, cv.out_channels);
    gw.noalias() += g * c.cols[static_cast<std::size_t>(l)].transpose();
    gb += g.rowwise().sum();
    if (l == 0) break;
    ConstMatrixMap w(theta_.data() + cv.weight, cv.out_channels, kk);
    Matrix d_cols = w.transpose() * g;
    col2im(d_cols, cv, nrefs, g);
  }
}

template <class S>
std::vector<typename QNetwork<S>::Block> QNetwork<S>::blocks() const {
  std::vector<Block> out;
  for (const auto& c : conv_) {
    out.push_back({c.name + ".weight", c.weight, c.out_channels, c.in_channels * c.kernel * c.kernel});
    out.push_back({c.name + ".bias", c.bias, c.out_channels, 1});
  }
  for (const Dense* d : {&param_[0], &param_[1], &step_, &head_[0], &head_[1], &head_[2]}) {
    out.push_back({d->name + ".weight", d->weight, d->out, d->in});
    out.push_back({d->name + ".bias", d->bias, d->out, 1});
  }
  return out;
}

template class QNetwork<float>;
template class QNetwork<double>;

template <class S>
void Adam<S>::step(Vector& theta, const Vector& grad) {
  if (m_.size() != theta.size()) {
    m_ = Vector::Zero(theta.size());
    v_ = Vector::Zero(theta.size());
  }
  ++t_;
  const auto b1 = static_cast<S>(beta1_);
  const auto b2 = static_cast<S>(beta2_);
  m_ = b1 * m_ + (S(1) - b1) * grad;
  v_ = b2 * v_ + (S(1) - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto step = static_cast<S>(lr_ * std::sqrt(c2) / c1);
  const auto eps = static_cast<S>(epsilon_ * std::sqrt(c2));
  theta.array() -= step * m_.array() / (v_.array().sqrt() + eps);
}

template class Adam<float>;
template class Adam<double>;

int select_action(std::span<const double> q, const std::vector<bool>& mask, double epsilon, std::mt19937_64& rng) {
  require(mask.size() == q.size(), "select_action: mask and Q-values differ in length");
  std::vector<int> legal;
  for (std::size_t a = 0; a < mask.size(); ++a)
    if (mask[a]) legal.push_back(static_cast<int>(a));
  require(!legal.empty(), "select_action: no legal action");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (epsilon > 0.0 && coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
    return legal[pick(rng)];
  }
  int best = legal.front();
  for (int a : legal)
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  return best;
}

template <class S>
int greedy_action(const Eigen::Matrix<S, Eigen::Dynamic, 1>& q, ActionRange legal) {
  require(legal.size() > 0 && legal.begin >= 0 && legal.end <= q.size(), "greedy_action: bad legal range");
  int best = legal.begin;
  for (int a = legal.begin + 1; a < legal.end; ++a)
    if (q[a] > q[best]) best = a;
  return best;
}

template int greedy_action<float>(const Eigen::VectorXf&, ActionRange);
template int greedy_action<double>(const Eigen::VectorXd&, ActionRange);

template <class S>
int select_action(const QNetwork<S>& net, const Observation& obs, double epsilon, std::mt19937_64& rng) {
  require(obs.legal.size() > 0, "select_action: no legal action");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (epsilon > 0.0 && coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(obs.legal.begin, obs.legal.end - 1);
    return pick(rng);
  }
  return greedy_action<S>(net.q_values(obs), obs.legal);
}

template int select_action<float>(const QNetwork<float>&, const Observation&, double, std::mt19937_64&);
template int select_action<double>(const QNetwork<double>&, const Observation&, double, std::mt19937_64&);

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::string describe(const NetworkConfig& n, const InputLayout& l) {
  std::ostringstream s;
  s << "param_features=" << l.param_features << "\nstep_features=" << l.step_features << "\nactions=" << l.actions
    << "\nreference_pool=" << n.reference_pool << "\nconv_stride=" << n.conv_stride;
  for (int i = 0; i < 3; ++i)
    s << "\nconv" << i << "_channels=" << n.conv_channels[static_cast<std::size_t>(i)] << "\nconv" << i
      << "_kernel=" << n.conv_kernels[static_cast<std::size_t>(i)];
  s << "\nparam_hidden0=" << n.param_hidden[0] << "\nparam_hidden1=" << n.param_hidden[1]
    << "\nstep_hidden=" << n.step_hidden << "\nhead_hidden0=" << n.head_hidden[0]
    << "\nhead_hidden1=" << n.head_hidden[1] << '\n';
  return s.str();
}

void parse_description(const std::string& text, NetworkConfig& n, InputLayout& l) {
  std::map<std::string, int> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    try {
      kv[line.substr(0, eq)] = std::stoi(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw FormatError("checkpoint: bad metadata line '" + line + "'");
    }
  }
  auto get = [&kv](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("checkpoint: metadata lacks " + key);
    return it->second;
  };
  l.param_features = get("param_features");
  l.step_features = get("step_features");
  l.actions = get("actions");
  n.reference_pool = get("reference_pool");
  n.conv_stride = get("conv_stride");
  for (int i = 0; i < 3; ++i) {
    n.conv_channels[static_cast<std::size_t>(i)] = get("conv" + std::to_string(i) + "_channels");
    n.conv_kernels[static_cast<std::size_t>(i)] = get("conv" + std::to_string(i) + "_kernel");
  }
  n.param_hidden = {get("param_hidden0"), get("param_hidden1")};
  n.step_hidden = get("step_hidden");
  n.head_hidden = {get("head_hidden0"), get("head_hidden1")};
}

}  // namespace

void write_checkpoint(const QNetwork<float>& net, std::ostream& out) {
  out.write("PQCK", 4);
  io::write_pod(out, kCheckpointVersion);
  io::write_string(out, describe(net.config(), net.layout()));
  const auto blocks = net.blocks();
  io::write_pod(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    io::write_string(out, b.name);
    io::write_pod(out, static_cast<std::uint32_t>(b.rows));
    io::write_pod(out, static_cast<std::uint32_t>(b.cols));
    io::write_array(out, std::span<const float>(net.parameters().data() + b.offset,
                                                static_cast<std::size_t>(b.rows) * b.cols));
  }
  if (!out) throw FormatError("write_checkpoint: write failed");
}

QNetwork<float> read_checkpoint(std::istream& in) {
  io::expect_magic(in, "PQCK", "checkpoint");
  const auto version = io::read_pod<std::uint32_t>(in, "checkpoint header");
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  NetworkConfig config;
  InputLayout layout;
  parse_description(io::read_string(in, "checkpoint metadata"), config, layout);
  QNetwork<float> net;
  try {
    net = QNetwork<float>(config, layout);
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint: inconsistent metadata: ") + e.what());
  }
  const auto blocks = net.blocks();
  const auto count = io::read_pod<std::uint32_t>(in, "checkpoint header");
  if (count != blocks.size()) throw FormatError("checkpoint: unexpected block count");
  for (const auto& b : blocks) {
    const auto name = io::read_string(in, "checkpoint block name");
    const auto rows = io::read_pod<std::uint32_t>(in, "checkpoint block");
    const auto cols = io::read_pod<std::uint32_t>(in, "checkpoint block");
    if (name != b.name || rows != static_cast<std::uint32_t>(b.rows) || cols != static_cast<std::uint32_t>(b.cols))
      throw FormatError("checkpoint: block " + name + " does not match the network layout");
    io::read_array(in, std::span<float>(net.parameters().data() + b.offset, std::size_t{rows} * cols),
                   "checkpoint payload");
  }
  return net;
}

void save_checkpoint(const QNetwork<float>& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(net, out);
}

QNetwork<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace primesh
