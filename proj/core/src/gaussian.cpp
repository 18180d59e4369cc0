#include "w2gn/metrics/gaussian.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

#include "w2gn/errors.hpp"

namespace w2gn::metrics {

namespace {

constexpr double kEigenFloor = 1e-12;

Eigen::MatrixXd spectral_apply(const Eigen::MatrixXd& m, double (*f)(double)) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = f(std::max(ev[i], kEigenFloor));
  Eigen::MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

void GaussianSpec::validate() const {
  const Eigen::Index d = mean.size();
  if (d == 0) throw ConfigError("Gaussian mean is empty");
  if (covariance.rows() != d || covariance.cols() != d) {
    throw ConfigError(fmt::format("Gaussian covariance must be {}x{}", d, d));
  }
  if (!mean.allFinite() || !covariance.allFinite()) throw ConfigError("Gaussian parameters must be finite");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError("Gaussian covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("Gaussian covariance is not positive definite");
  }
}

GaussianSpec GaussianSpec::standard(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)};
}

Eigen::MatrixXd AffineMap::operator()(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out = linear * points;
  out.colwise() += shift;
  return out;
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  return spectral_apply(m, [](double v) { return std::sqrt(v); });
}

Eigen::MatrixXd inv_sqrtm_psd(const Eigen::MatrixXd& m) {
  return spectral_apply(m, [](double v) { return 1.0 / std::sqrt(v); });
}

double gaussian_w2(const GaussianSpec& p, const GaussianSpec& q) {
  p.validate();
  q.validate();
  if (p.dim() != q.dim()) throw ConfigError("Gaussians differ in dimension");
  const Eigen::MatrixXd root_q = sqrtm_psd(q.covariance);
  const Eigen::MatrixXd cross = sqrtm_psd(root_q * p.covariance * root_q);
  const double trace = (p.covariance + q.covariance - 2.0 * cross).trace();
  return 0.5 * ((p.mean - q.mean).squaredNorm() + trace);
}

AffineMap gaussian_optimal_map(const GaussianSpec& p, const GaussianSpec& q) {
  p.validate();
  q.validate();
  if (p.dim() != q.dim()) throw ConfigError("Gaussians differ in dimension");
  const Eigen::MatrixXd root_p = sqrtm_psd(p.covariance);
  const Eigen::MatrixXd inv_root_p = inv_sqrtm_psd(p.covariance);
  Eigen::MatrixXd a = inv_root_p * sqrtm_psd(root_p * q.covariance * root_p) * inv_root_p;
  a = 0.5 * (a + a.transpose());
  return {a, q.mean - a * p.mean};
}

double corr_reference(const GaussianSpec& p, const GaussianSpec& q) {
  const double constant = 0.5 * (p.mean.squaredNorm() + p.covariance.trace()) +
                          0.5 * (q.mean.squaredNorm() + q.covariance.trace());
  return constant - gaussian_w2(p, q);
}

}  // namespace w2gn::metrics
