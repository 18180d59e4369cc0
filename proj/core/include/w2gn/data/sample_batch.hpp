#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <random>

namespace w2gn::data {

using Rng = std::mt19937_64;

/// Points drawn from a distribution, stored one sample per column (dim x n).
struct SampleBatch {
  Eigen::MatrixXd points;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(points.rows()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(points.cols()); }
};

}  // namespace w2gn::data
