#pragma once

#include <Eigen/Core>

namespace w2gn::metrics {

struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }

  /// Throws ConfigError unless the covariance is square, matches the mean,
  /// is symmetric to 1e-12, and has strictly positive eigenvalues.
  void validate() const;

  static GaussianSpec standard(std::size_t dim);
};

/// x -> linear * x + shift.
struct AffineMap {
  Eigen::MatrixXd linear;
  Eigen::VectorXd shift;

  Eigen::MatrixXd operator()(const Eigen::MatrixXd& points) const;
};

/// Symmetric PSD square root via eigendecomposition, eigenvalues floored at 1e-12.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m);
Eigen::MatrixXd inv_sqrtm_psd(const Eigen::MatrixXd& m);

/// Squared W2 with the 1/2 cost convention:
/// 1/2 [ |m1 - m2|^2 + tr(S1 + S2 - 2 (S2^1/2 S1 S2^1/2)^1/2) ].
double gaussian_w2(const GaussianSpec& p, const GaussianSpec& q);

/// Optimal transport map between Gaussians, T(x) = m2 + A (x - m1) with
/// A = S1^-1/2 (S1^1/2 S2 S1^1/2)^1/2 S1^-1/2 (symmetric PSD).
AffineMap gaussian_optimal_map(const GaussianSpec& p, const GaussianSpec& q);

/// Const(P, Q) - W2^2(P, Q) where Const = 1/2 E|x|^2 + 1/2 E|y|^2.
double corr_reference(const GaussianSpec& p, const GaussianSpec& q);

}  // namespace w2gn::metrics
