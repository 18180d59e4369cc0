#include "w2gn/data/toy.hpp"

#include <fmt/format.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

#include "w2gn/errors.hpp"

namespace w2gn::data {

std::string to_string(ToyKind kind) {
  switch (kind) {
    case ToyKind::standard_gaussian: return "standard-gaussian";
    case ToyKind::gaussian: return "gaussian";
    case ToyKind::gaussian_ring: return "gaussian-ring";
    case ToyKind::gaussian_grid: return "gaussian-grid";
    case ToyKind::swiss_roll: return "swiss-roll";
  }
  return "unknown";
}

std::optional<ToyKind> parse_toy_kind(const std::string& name) {
  for (auto k : {ToyKind::standard_gaussian, ToyKind::gaussian, ToyKind::gaussian_ring, ToyKind::gaussian_grid,
                 ToyKind::swiss_roll}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

ToyDistribution ToyDistribution::standard_gaussian(std::size_t dim) {
  ToyDistribution d;
  d.kind = ToyKind::standard_gaussian;
  d.dim = dim;
  return d;
}

ToyDistribution ToyDistribution::normal(metrics::GaussianSpec spec) {
  ToyDistribution d;
  d.kind = ToyKind::gaussian;
  d.dim = spec.dim();
  d.gaussian = std::move(spec);
  return d;
}

ToyDistribution ToyDistribution::ring(std::size_t components, double radius, double sigma) {
  ToyDistribution d;
  d.kind = ToyKind::gaussian_ring;
  d.components = components;
  d.radius = radius;
  d.sigma = sigma;
  return d;
}

ToyDistribution ToyDistribution::grid(std::size_t per_side, double spacing, double sigma) {
  ToyDistribution d;
  d.kind = ToyKind::gaussian_grid;
  d.components = per_side;
  d.spacing = spacing;
  d.sigma = sigma;
  return d;
}

ToyDistribution ToyDistribution::swiss_roll(double noise) {
  ToyDistribution d;
  d.kind = ToyKind::swiss_roll;
  d.noise = noise;
  return d;
}

void ToyDistribution::validate() const {
  switch (kind) {
    case ToyKind::standard_gaussian:
      if (dim == 0) throw ConfigError("standard-gaussian needs dim >= 1");
      break;
    case ToyKind::gaussian:
      if (!gaussian) throw ConfigError("gaussian distribution needs mean and covariance");
      gaussian->validate();
      break;
    case ToyKind::gaussian_ring:
    case ToyKind::gaussian_grid:
      if (components == 0) throw ConfigError(fmt::format("{} needs at least one component", to_string(kind)));
      if (!(sigma >= 0.0)) throw ConfigError(fmt::format("{} sigma must be >= 0", to_string(kind)));
      if (kind == ToyKind::gaussian_ring && !(radius > 0.0)) throw ConfigError("gaussian-ring radius must be > 0");
      if (kind == ToyKind::gaussian_grid && !(spacing > 0.0)) throw ConfigError("gaussian-grid spacing must be > 0");
      break;
    case ToyKind::swiss_roll:
      if (!(noise >= 0.0)) throw ConfigError("swiss-roll noise must be >= 0");
      break;
  }
}

std::size_t ToyDistribution::dimension() const {
  switch (kind) {
    case ToyKind::standard_gaussian: return dim;
    case ToyKind::gaussian: return gaussian ? gaussian->dim() : 0;
    default: return 2;
  }
}

std::vector<Eigen::VectorXd> ToyDistribution::modes() const {
  std::vector<Eigen::VectorXd> out;
  if (kind == ToyKind::gaussian_ring) {
    for (std::size_t i = 0; i < components; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(components);
      out.push_back(Eigen::Vector2d(radius * std::cos(a), radius * std::sin(a)));
    }
  } else if (kind == ToyKind::gaussian_grid) {
    const double center = 0.5 * static_cast<double>(components - 1);
    for (std::size_t i = 0; i < components; ++i) {
      for (std::size_t j = 0; j < components; ++j) {
        out.push_back(Eigen::Vector2d((static_cast<double>(i) - center) * spacing,
                                      (static_cast<double>(j) - center) * spacing));
      }
    }
  }
  return out;
}

std::optional<metrics::GaussianSpec> ToyDistribution::as_gaussian() const {
  if (kind == ToyKind::standard_gaussian) return metrics::GaussianSpec::standard(dim);
  if (kind == ToyKind::gaussian) return gaussian;
  return std::nullopt;
}

ToySampler::ToySampler(ToyDistribution dist) : dist_(std::move(dist)) {
  dist_.validate();
  dim_ = dist_.dimension();
  modes_ = dist_.modes();
  if (dist_.kind == ToyKind::gaussian) {
    Eigen::LLT<Eigen::MatrixXd> llt(dist_.gaussian->covariance);
    if (llt.info() != Eigen::Success) throw ConfigError("gaussian covariance has no Cholesky factor");
    chol_ = llt.matrixL();
  }
}

SampleBatch ToySampler::draw(std::size_t n, Rng& rng) const {
  if (n == 0) throw ConfigError("sample size must be >= 1");
  const auto d = static_cast<Eigen::Index>(dim_);
  const auto m = static_cast<Eigen::Index>(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  SampleBatch out{Eigen::MatrixXd(d, m)};
  auto& pts = out.points;
  switch (dist_.kind) {
    case ToyKind::standard_gaussian:
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < d; ++i) pts(i, j) = normal(rng);
      break;
    case ToyKind::gaussian: {
      Eigen::VectorXd z(d);
      for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
        pts.col(j) = dist_.gaussian->mean + chol_ * z;
      }
      break;
    }
    case ToyKind::gaussian_ring:
    case ToyKind::gaussian_grid: {
      std::uniform_int_distribution<std::size_t> pick(0, modes_.size() - 1);
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto& mu = modes_[pick(rng)];
        const double nx = normal(rng);
        const double ny = normal(rng);
        pts(0, j) = mu[0] + dist_.sigma * nx;
        pts(1, j) = mu[1] + dist_.sigma * ny;
      }
      break;
    }
    case ToyKind::swiss_roll: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (Eigen::Index j = 0; j < m; ++j) {
        const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * unit(rng));
        const double nx = normal(rng);
        const double ny = normal(rng);
        pts(0, j) = t * std::cos(t) / 10.0 + dist_.noise * nx;
        pts(1, j) = t * std::sin(t) / 10.0 + dist_.noise * ny;
      }
      break;
    }
  }
  return out;
}

MixtureSampler::MixtureSampler(std::shared_ptr<const Sampler> a, std::shared_ptr<const Sampler> b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (!a_ || !b_) throw ConfigError("mixture sampler needs two samplers");
  if (a_->dim() != b_->dim()) throw ConfigError("mixture components differ in dimension");
}

SampleBatch MixtureSampler::draw(std::size_t n, Rng& rng) const {
  if (n < 2) return a_->draw(n, rng);
  const std::size_t half = n / 2;
  SampleBatch first = a_->draw(half, rng);
  SampleBatch second = b_->draw(n - half, rng);
  SampleBatch out{Eigen::MatrixXd(first.points.rows(), static_cast<Eigen::Index>(n))};
  out.points << first.points, second.points;
  return out;
}

SampleBatch sample(const ToyDistribution& dist, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return ToySampler(dist).draw(n, rng);
}

std::vector<std::size_t> nearest_mode(const SampleBatch& batch, const std::vector<Eigen::VectorXd>& modes) {
  if (modes.empty()) throw ConfigError("nearest_mode needs at least one mode");
  std::vector<std::size_t> out(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const double d = (batch.points.col(static_cast<Eigen::Index>(j)) - modes[k]).squaredNorm();
      if (d < best) {
        best = d;
        out[j] = k;
      }
    }
  }
  return out;
}

void add_gaussian_noise(SampleBatch& batch, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> normal(0.0, sigma);
  for (Eigen::Index j = 0; j < batch.points.cols(); ++j)
    for (Eigen::Index i = 0; i < batch.points.rows(); ++i) batch.points(i, j) += normal(rng);
}

}  // namespace w2gn::data
