#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace w2gn::optim {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments over one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamConfig config);

  void step(std::span<double> params, std::span<const double> grad);
  void reset();

  std::size_t steps() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return config_; }
  std::span<const double> first_moment() const noexcept { return m_; }
  std::span<const double> second_moment() const noexcept { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t steps_ = 0;
};

}  // namespace w2gn::optim
