#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "w2gn/icnn/dense_icnn.hpp"
#include "w2gn/optim/adam.hpp"

namespace w2gn::train {

/// Hyperparameters shared by the three training procedures. Defaults follow
/// the 2D toy setup: [2; 128; 128, 64], lr 1e-3, batch 1024, lambda 1.
struct TrainConfig {
  double lambda_y = 1.0;
  double lambda_x = 0.0;  // weight of the X-side cycle term; 0 disables it
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 1024;
  std::size_t iters = 30000;
  double l1_penalty = 1e-10;
  bool stop_gradient = true;
  double smoothing_sigma = 0.0;
  std::uint64_t seed = 0;
  icnn::DenseICNNSpec spec;

  std::size_t pretrain_iters = 2000;
  double pretrain_lr = 1e-2;
  std::size_t pretrain_batch_size = 256;

  std::size_t log_interval = 100;
  std::size_t eval_size = 1024;

  std::size_t inner_iters = 10;  // minimax only
  std::size_t invert_steps = 200;
  double invert_tol = 1e-4;
  double invert_lr = 0.0;  // 0 selects damped Newton; > 0 plain gradient ascent

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  /// Non-fatal remarks, e.g. lambda * beta <= 1.
  std::vector<std::string> warnings() const;

  optim::AdamConfig adam(double learning_rate) const {
    return {learning_rate, adam_beta1, adam_beta2, adam_eps};
  }
};

}  // namespace w2gn::train
