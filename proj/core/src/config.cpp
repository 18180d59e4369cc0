#include "w2gn/train/config.hpp"

#include <fmt/format.h>

#include <cmath>

#include "w2gn/errors.hpp"

namespace w2gn::train {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void TrainConfig::validate() const {
  spec.validate();
  require(finite_nonneg(lambda_y), "lambda_y must be a finite nonnegative number");
  require(finite_nonneg(lambda_x), "lambda_x must be a finite nonnegative number");
  require(std::isfinite(lr) && lr > 0.0, "lr must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(batch_size >= 2, "batch_size must be at least 2");
  require(finite_nonneg(l1_penalty), "l1_penalty must be nonnegative");
  require(finite_nonneg(smoothing_sigma), "smoothing_sigma must be nonnegative");
  require(std::isfinite(pretrain_lr) && pretrain_lr > 0.0, "pretrain_lr must be positive");
  require(pretrain_batch_size >= 1, "pretrain_batch_size must be positive");
  require(log_interval >= 1, "log_interval must be at least 1");
  require(eval_size >= 2, "eval_size must be at least 2");
  require(invert_tol > 0.0, "invert_tol must be positive");
  require(invert_lr >= 0.0, "invert_lr must be nonnegative");
}

std::vector<std::string> TrainConfig::warnings() const {
  std::vector<std::string> out;
  if (lambda_y * spec.beta <= 1.0) {
    out.push_back(fmt::format(
        "lambda_y * beta = {:.3g} <= 1: the correlation upper bound is only guaranteed when the fitted "
        "potential is more than 1/lambda_y strongly convex",
        lambda_y * spec.beta));
  }
  return out;
}

}  // namespace w2gn::train
