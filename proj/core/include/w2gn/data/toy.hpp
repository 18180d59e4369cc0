#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "w2gn/data/sample_batch.hpp"
#include "w2gn/metrics/gaussian.hpp"

namespace w2gn::data {

enum class ToyKind { standard_gaussian, gaussian, gaussian_ring, gaussian_grid, swiss_roll };

std::string to_string(ToyKind kind);
/// Parses "standard-gaussian", "gaussian", "gaussian-ring", "gaussian-grid", "swiss-roll".
std::optional<ToyKind> parse_toy_kind(const std::string& name);

/// Toy 2D benchmarks and Gaussians.
///
/// Ring: `components` means evenly spaced on a circle of `radius`.
/// Grid: `components` x `components` means on a lattice with `spacing`, centered at 0.
/// Swiss roll: t ~ U[1.5 pi, 4.5 pi], (t cos t, t sin t) / 10 + N(0, noise^2 I).
/// Mixture weights are exactly uniform; every component has isotropic std `sigma`.
struct ToyDistribution {
  ToyKind kind = ToyKind::standard_gaussian;
  std::size_t dim = 2;
  std::size_t components = 8;
  double radius = 4.0;
  double spacing = 2.0;
  double sigma = 0.2;
  double noise = 0.025;
  std::optional<metrics::GaussianSpec> gaussian;

  static ToyDistribution standard_gaussian(std::size_t dim = 2);
  static ToyDistribution normal(metrics::GaussianSpec spec);
  static ToyDistribution ring(std::size_t components = 8, double radius = 4.0, double sigma = 0.2);
  static ToyDistribution grid(std::size_t per_side = 5, double spacing = 2.0, double sigma = 0.2);
  static ToyDistribution swiss_roll(double noise = 0.025);

  void validate() const;
  std::size_t dimension() const;

  /// Component means of ring and grid mixtures (empty for other kinds).
  std::vector<Eigen::VectorXd> modes() const;

  /// Exact Gaussian parameters for standard-gaussian and gaussian kinds.
  std::optional<metrics::GaussianSpec> as_gaussian() const;
};

class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual std::size_t dim() const = 0;
  virtual SampleBatch draw(std::size_t n, Rng& rng) const = 0;
};

class ToySampler final : public Sampler {
 public:
  explicit ToySampler(ToyDistribution dist);
  std::size_t dim() const override { return dim_; }
  SampleBatch draw(std::size_t n, Rng& rng) const override;
  const ToyDistribution& distribution() const noexcept { return dist_; }

 private:
  ToyDistribution dist_;
  std::size_t dim_;
  std::vector<Eigen::VectorXd> modes_;
  Eigen::MatrixXd chol_;
};

/// First n/2 columns from `a`, the rest from `b`.
class MixtureSampler final : public Sampler {
 public:
  MixtureSampler(std::shared_ptr<const Sampler> a, std::shared_ptr<const Sampler> b);
  std::size_t dim() const override { return a_->dim(); }
  SampleBatch draw(std::size_t n, Rng& rng) const override;

 private:
  std::shared_ptr<const Sampler> a_;
  std::shared_ptr<const Sampler> b_;
};

/// n i.i.d. draws, deterministic in (dist, n, seed).
SampleBatch sample(const ToyDistribution& dist, std::size_t n, std::uint64_t seed);

/// Index of the nearest mode for every column.
std::vector<std::size_t> nearest_mode(const SampleBatch& batch, const std::vector<Eigen::VectorXd>& modes);

/// Adds N(0, sigma^2) noise to every coordinate in place.
void add_gaussian_noise(SampleBatch& batch, double sigma, Rng& rng);

}  // namespace w2gn::data
