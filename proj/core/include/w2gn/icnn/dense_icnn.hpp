#pragma once

// Dense input-convex network:
//
//   z_0 = CELU(cq_0(x))
//   z_k = CELU(W_k z_{k-1} + a_k + cq_k(x)),   k = 1..K
//   psi(x) = <w, z_K> + a_out + beta/2 |x|^2
//
// with cq_k(x)_n = |F_{k,n} x|^2 + <b_{k,n}, x> + c_{k,n} and W_k, w >= 0.
// All parameters live in one flat vector in declaration order:
//   for k = 0..K:  F_k (h_k * r * D, neuron-major), b_k (h_k * D), c_k (h_k)
//   for k = 1..K:  W_k (h_k * h_{k-1}, row-major), a_k (h_k)
//   w (h_K), a_out (1)

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace w2gn::icnn {

struct DenseICNNSpec {
  std::size_t input_dim = 2;
  std::size_t rank = 2;
  std::vector<std::size_t> widths{128, 128, 64};  // h_0, h_1, ..., h_K
  double beta = 1e-6;
  double celu_alpha = 1.0;

  /// Throws ConfigError when rank > input_dim, widths is empty, or any size is zero.
  void validate() const;

  std::size_t hidden_count() const noexcept { return widths.size(); }
  std::size_t parameter_count() const;
  std::size_t quadratic_parameter_count() const;

  friend bool operator==(const DenseICNNSpec&, const DenseICNNSpec&) = default;
};

/// Half-open range of indices into the flat parameter vector.
struct ParamRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

struct QuadraticLayerLayout {
  std::size_t outputs = 0;
  ParamRange factors;  // outputs * rank * input_dim
  ParamRange linear;   // outputs * input_dim
  ParamRange offset;   // outputs
};

struct PositiveLayerLayout {
  std::size_t outputs = 0;
  std::size_t inputs = 0;
  ParamRange weights;  // outputs * inputs, clipped to [0, inf)
  ParamRange bias;     // outputs
};

struct ParameterLayout {
  std::vector<QuadraticLayerLayout> quadratic;  // K + 1 layers
  std::vector<PositiveLayerLayout> positive;    // K hidden layers, then the output layer
  std::size_t total = 0;

  explicit ParameterLayout(const DenseICNNSpec& spec);

  const PositiveLayerLayout& output_layer() const { return positive.back(); }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

// Flat parameter or gradient storage. Eigen peels vectorized reductions at the first
// aligned element, so a fixed base alignment keeps results independent of where malloc
// happened to put the buffer.
using ParamBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// Read-only view of one convex quadratic layer.
struct ConvexQuadraticView {
  ConstRowMap factors;  // (outputs * rank) x input_dim; rows n*r .. n*r+r-1 form F_n
  ConstRowMap linear;   // outputs x input_dim
  ConstVecMap offset;   // outputs
  std::size_t rank;
};

struct PositiveLinearView {
  ConstRowMap weights;  // outputs x inputs
  ConstVecMap bias;
};

class DenseICNN {
 public:
  /// All parameters zero.
  explicit DenseICNN(DenseICNNSpec spec);

  const DenseICNNSpec& spec() const noexcept { return spec_; }
  const ParameterLayout& layout() const noexcept { return layout_; }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  ConvexQuadraticView quadratic(std::size_t k) const;
  PositiveLinearView positive(std::size_t k) const;  // k in [0, K): hidden; k == K: output
  PositiveLinearView output_layer() const { return positive(spec_.hidden_count() - 1); }

  friend bool operator==(const DenseICNN& a, const DenseICNN& b) {
    return a.spec_ == b.spec_ && a.params_ == b.params_;
  }

 private:
  DenseICNNSpec spec_;
  ParameterLayout layout_;
  ParamBuffer params_;
};

/// One convex quadratic layer applied to a single point: |F_n x|^2 + <b_n, x> + c_n.
Eigen::VectorXd cq_forward(const ConvexQuadraticView& layer, std::span<const double> x);

/// Network output at a single point.
double icnn_forward(const DenseICNN& net, std::span<const double> x);

/// Input gradient of the network at a single point, computed on the expression tape.
std::vector<double> push(const DenseICNN& net, std::span<const double> x);

/// Network outputs for every column of `points` (input_dim x n).
Eigen::VectorXd icnn_forward_batch(const DenseICNN& net, const Eigen::MatrixXd& points);

/// Input gradients for every column of `points`.
Eigen::MatrixXd push_batch(const DenseICNN& net, const Eigen::MatrixXd& points);

/// Clamps every positive-layer weight to >= 0. Returns the number of entries changed.
std::size_t project_nonneg(DenseICNN& net);

/// Random parameters: F ~ U(-1,1)/sqrt(r D), b ~ U(-1,1)/sqrt(D), positive weights
/// ~ U[0, 2/sqrt(fan_in)], biases and offsets zero.
DenseICNN init(const DenseICNNSpec& spec, std::uint64_t seed);

/// Largest midpoint-convexity violation psi(t x + (1-t) x') - t psi(x) - (1-t) psi(x')
/// over `trials` random triples with x, x' ~ N(0, scale^2 I).
double convexity_check(const DenseICNN& net, std::size_t trials, std::mt19937_64& rng, double scale = 3.0);

/// Same check applied to psi(x) - beta/2 |x|^2, which is convex iff psi is beta-strongly convex.
double strong_convexity_check(const DenseICNN& net, std::size_t trials, std::mt19937_64& rng,
                              double scale = 3.0);

/// Sum of |p| over all parameters except biases and offsets.
double l1_norm(const DenseICNN& net);

/// Adds `coefficient * sign(p)` to `grad` for every penalized parameter.
void add_l1_subgradient(const DenseICNN& net, double coefficient, std::span<double> grad);

}  // namespace w2gn::icnn
