#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <vector>

#include "w2gn/data/sample_batch.hpp"
#include "w2gn/icnn/dense_icnn.hpp"

namespace w2gn::testing {

/// All parameters zero: psi(x) = beta/2 |x|^2.
inline icnn::DenseICNN quadratic_net(std::size_t dim, double beta, std::vector<std::size_t> widths = {4, 4}) {
  icnn::DenseICNNSpec spec;
  spec.input_dim = dim;
  spec.rank = 1;
  spec.widths = std::move(widths);
  spec.beta = beta;
  return icnn::DenseICNN(spec);
}

/// Randomly initialized net whose biases and offsets are also randomized,
/// so that every parameter group influences the output.
inline icnn::DenseICNN random_net(const icnn::DenseICNNSpec& spec, std::uint64_t seed) {
  icnn::DenseICNN net = icnn::init(spec, seed);
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> n01(0.0, 0.3);
  const auto& layout = net.layout();
  auto params = net.parameters();
  for (const auto& q : layout.quadratic)
    for (std::size_t i = q.offset.begin; i < q.offset.end; ++i) params[i] = n01(rng);
  for (const auto& p : layout.positive)
    for (std::size_t i = p.bias.begin; i < p.bias.end; ++i) params[i] = n01(rng);
  return net;
}

inline data::SampleBatch gaussian_batch(std::size_t dim, std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  data::SampleBatch b{Eigen::MatrixXd(dim, n)};
  for (Eigen::Index j = 0; j < b.points.cols(); ++j)
    for (Eigen::Index i = 0; i < b.points.rows(); ++i) b.points(i, j) = scale * n01(rng);
  return b;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace w2gn::testing
