#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "primesh/env/observation.hpp"

namespace primesh {

/// Widths of the three-stream Q-network. The reference raster is first
/// average-pooled by `reference_pool` (1 keeps the full 128x128 input).
struct NetworkConfig {
  int reference_pool = 1;
  std::array<int, 3> conv_channels{16, 32, 64};
  std::array<int, 3> conv_kernels{5, 3, 3};
  int conv_stride = 2;
  std::array<int, 2> param_hidden{256, 128};
  int step_hidden = 128;
  std::array<int, 2> head_hidden{512, 256};

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// How an observation's feature vector splits: `param_features` primitive or
/// loop parameters, then a `step_features` one-hot. `actions` is the output size.
struct InputLayout {
  int param_features = 0;
  int step_features = 0;
  int actions = 0;

  friend bool operator==(const InputLayout&, const InputLayout&) = default;
};

template <class S>
class QNetwork {
 public:
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  struct Dense {
    std::string name;
    std::size_t weight = 0;  // offsets into the flat parameter vector
    std::size_t bias = 0;
    int out = 0;
    int in = 0;
  };

  struct Conv {
    std::string name;
    std::size_t weight = 0;
    std::size_t bias = 0;
    int out_channels = 0;
    int in_channels = 0;
    int kernel = 0;
    int stride = 0;
    int pad = 0;
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  };

  /// Intermediate values kept by forward() for backward().
  struct Cache {
    std::vector<std::shared_ptr<const DepthMap>> references;
    std::vector<int> reference_of_sample;
    std::array<Matrix, 3> cols;  // im2col input of each conv, references side by side
    std::array<Matrix, 3> conv_out;
    Matrix params_in, param_h1, param_h2, step_in, step_h, joined, head_h1, head_h2;
  };

  QNetwork() = default;
  QNetwork(const NetworkConfig& config, const InputLayout& layout);

  /// Random initialization (He-uniform hidden layers, biases zero).
  void initialize(std::uint64_t seed);

  /// Q-values, one column per observation. Observations sharing a reference
  /// raster share one pass through the convolutional stream.
  Matrix forward(std::span<const Observation* const> batch, Cache* cache = nullptr) const;
  Vector q_values(const Observation& obs) const;

  /// Accumulates into `grad` the parameter gradient for output gradient `d_q`.
  void backward(const Cache& cache, const Matrix& d_q, Vector& grad) const;

  Vector& parameters() { return theta_; }
  const Vector& parameters() const { return theta_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }

  const NetworkConfig& config() const { return config_; }
  const InputLayout& layout() const { return layout_; }
  int action_count() const { return layout_.actions; }

  /// Named parameter blocks: (name, offset, rows, cols). Weights are
  /// column-major rows x cols matrices, biases have cols = 1.
  struct Block {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;
  };
  std::vector<Block> blocks() const;

  MatrixMap weight(const Dense& d) { return MatrixMap(theta_.data() + d.weight, d.out, d.in); }
  const Dense& output_layer() const { return head_[2]; }

 private:
  Matrix pooled_reference(const std::shared_ptr<const DepthMap>& map) const;
  void check_batch(std::span<const Observation* const> batch) const;

  NetworkConfig config_;
  InputLayout layout_;
  std::array<Conv, 3> conv_{};
  std::array<Dense, 2> param_{};
  Dense step_;
  std::array<Dense, 3> head_{};
  int pooled_size_ = 0;
  int conv_features_ = 0;
  Vector theta_;
};

extern template class QNetwork<float>;
extern template class QNetwork<double>;

/// Current and target networks. The target changes only through sync().
template <class S>
struct DDQNPair {
  QNetwork<S> current;
  QNetwork<S> target;
  long syncs = 0;

  void sync() {
    target.parameters() = current.parameters();
    ++syncs;
  }
};

/// Adaptive-moment gradient descent over a flat parameter vector.
template <class S>
class Adam {
 public:
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  explicit Adam(double learning_rate = 8e-5, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(Vector& theta, const Vector& grad);
  long steps() const { return t_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  Vector m_, v_;
  long t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

/// Masked epsilon-greedy choice. With probability 1 - epsilon the legal
/// argmax (ties to the lowest index), otherwise a uniform legal action.
/// Throws ContractViolation for a mask with no legal action.
int select_action(std::span<const double> q, const std::vector<bool>& mask, double epsilon, std::mt19937_64& rng);

template <class S>
int select_action(const QNetwork<S>& net, const Observation& obs, double epsilon, std::mt19937_64& rng);

/// Greedy legal argmax of one column of Q-values.
template <class S>
int greedy_action(const Eigen::Matrix<S, Eigen::Dynamic, 1>& q, ActionRange legal);

// Checkpoint: "PQCK", u32 version, metadata string (key=value lines for the
// layout and network config), u32 block count, then per block a name string,
// u32 rows, u32 cols and rows*cols f32 values in column-major order. Strings
// are u32 length + bytes; everything little-endian.
void write_checkpoint(const QNetwork<float>& net, std::ostream& out);
QNetwork<float> read_checkpoint(std::istream& in);
void save_checkpoint(const QNetwork<float>& net, const std::filesystem::path& path);
QNetwork<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace primesh
