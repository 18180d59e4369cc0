#include "w2gn/optim/adam.hpp"

#include <cmath>

#include "w2gn/errors.hpp"

namespace w2gn::optim {

Adam::Adam(std::size_t size, AdamConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {
  if (!(config.lr > 0.0)) throw ConfigError("Adam learning rate must be positive");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw ConfigError("Adam moment decay rates must lie in [0, 1)");
  }
  if (!(config.eps > 0.0)) throw ConfigError("Adam eps must be positive");
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ConfigError("Adam step: parameter/gradient size does not match optimizer state");
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double step = config_.lr * std::sqrt(c2) / c1;
  const double eps = config_.eps * std::sqrt(c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) + eps);
  }
}

void Adam::reset() {
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  steps_ = 0;
}

}  // namespace w2gn::optim
