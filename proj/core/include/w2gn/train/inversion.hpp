#pragma once

#include <Eigen/Core>

#include "w2gn/icnn/dense_icnn.hpp"

namespace w2gn::train {

struct InversionOptions {
  std::size_t max_steps = 200;
  double tolerance = 1e-4;
  double lr = 0.0;  // 0: damped Newton with backtracking; > 0: fixed-step gradient ascent
};

struct InversionResult {
  Eigen::MatrixXd points;     // xhat per column
  Eigen::VectorXd residuals;  // |grad psi(xhat) - y|
  std::size_t unconverged = 0;
  std::size_t steps = 0;  // iterations actually run
  bool converged() const noexcept { return unconverged == 0; }
};

/// Maximizes <x, y> - psi(x) for every column of `targets`, starting at x0 = y.
/// The result is the conjugate gradient map applied to the targets.
InversionResult invert_gradient(const icnn::DenseICNN& net, const Eigen::MatrixXd& targets,
                                const InversionOptions& options = {});

}  // namespace w2gn::train
