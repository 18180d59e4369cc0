#include "w2gn/train/objective.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "w2gn/errors.hpp"
#include "w2gn/icnn/batch_pass.hpp"

namespace w2gn::train {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using icnn::BatchPass;
using icnn::for_each_chunk;

void check_inputs(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x, const SampleBatch& y) {
  const std::size_t d = theta.spec().input_dim;
  if (omega.spec().input_dim != d) throw ConfigError("primal and conjugate networks differ in input dimension");
  if (x.size() == 0 || y.size() == 0) throw ConfigError("objective needs non-empty batches");
  if (x.dim() != d || y.dim() != d) {
    throw ConfigError(fmt::format("batches must be {}-dimensional (got {} and {})", d, x.dim(), y.dim()));
  }
}

double mean_squared_distance(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).colwise().squaredNorm().mean();
}

double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(fmt::format("non-finite {}", what));
  return v;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

ObjectiveTerms finish(ObjectiveTerms t, const DenseICNN& theta, const DenseICNN& omega, const TrainConfig& cfg) {
  t.l1 = cfg.l1_penalty > 0.0 ? cfg.l1_penalty * (icnn::l1_norm(theta) + icnn::l1_norm(omega)) : 0.0;
  t.loss = t.term_x + t.term_y + 0.5 * cfg.lambda_y * t.r_y + 0.5 * cfg.lambda_x * t.r_x + t.l1;
  finite_or_throw(t.loss, "objective value");
  return t;
}

}  // namespace

CorrTerms corr_terms(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x, const SampleBatch& y) {
  check_inputs(theta, omega, x, y);
  CorrTerms t;
  t.term_x = icnn::icnn_forward_batch(theta, x.points).mean();
  const MatrixXd yhat = icnn::push_batch(omega, y.points);
  const VectorXd psi = icnn::icnn_forward_batch(theta, yhat);
  t.term_y = (yhat.cwiseProduct(y.points).colwise().sum().transpose() - psi).mean();
  finite_or_throw(t.term_x + t.term_y, "correlation terms");
  return t;
}

double cycle_reg_y(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& y) {
  check_inputs(theta, omega, y, y);
  const MatrixXd back = icnn::push_batch(theta, icnn::push_batch(omega, y.points));
  return finite_or_throw(mean_squared_distance(back, y.points), "cycle term R_Y");
}

double cycle_reg_x(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x) {
  check_inputs(theta, omega, x, x);
  const MatrixXd back = icnn::push_batch(omega, icnn::push_batch(theta, x.points));
  return finite_or_throw(mean_squared_distance(back, x.points), "cycle term R_X");
}

ObjectiveTerms w2gn_objective(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x,
                              const SampleBatch& y, const TrainConfig& cfg) {
  const CorrTerms c = corr_terms(theta, omega, x, y);
  ObjectiveTerms t;
  t.term_x = c.term_x;
  t.term_y = c.term_y;
  t.r_y = cycle_reg_y(theta, omega, y);
  t.r_x = cycle_reg_x(theta, omega, x);
  return finish(t, theta, omega, cfg);
}

ObjectiveTerms w2gn_objective_gradient(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x,
                                       const SampleBatch& y, const TrainConfig& cfg, std::span<double> grad_theta,
                                       std::span<double> grad_omega) {
  check_inputs(theta, omega, x, y);
  if (grad_theta.size() != theta.parameter_count() || grad_omega.size() != omega.parameter_count()) {
    throw ConfigError("gradient buffers must match the parameter counts");
  }
  std::fill(grad_theta.begin(), grad_theta.end(), 0.0);
  std::fill(grad_omega.begin(), grad_omega.end(), 0.0);
  const double inv_bx = 1.0 / static_cast<double>(x.size());
  const double inv_by = 1.0 / static_cast<double>(y.size());
  icnn::ParamBuffer primal(theta.parameter_count());
  ObjectiveTerms t;

  // Y side: yhat = grad psibar(y), g = grad psi(yhat). Column chunks keep the
  // cached activations in cache; reductions run in fixed chunk order.
  for_each_chunk(y.points.cols(), [&](Index begin, Index count) {
    const MatrixXd yc = y.points.middleCols(begin, count);
    const BatchPass omega_y(omega, yc);
    const MatrixXd yhat = omega_y.input_gradient();
    const BatchPass theta_yhat(theta, yhat);
    MatrixXd g;
    MatrixXd u;  // d loss / d yhat, the tangent pulled back through omega
    if (cfg.lambda_y > 0.0) {
      g = theta_yhat.input_gradient();
      const MatrixXd v = (cfg.lambda_y * inv_by) * (g - yc);
      auto so = theta_yhat.second_order(v, grad_theta, primal);
      u = std::move(so.input_hvp);
    } else {
      g = theta_yhat.backward(VectorXd(), primal);
      u = MatrixXd::Zero(g.rows(), g.cols());
    }
    t.term_y += (yhat.cwiseProduct(yc).colwise().sum().transpose() - theta_yhat.values()).sum();
    t.r_y += (g - yc).colwise().squaredNorm().sum();
    if (!cfg.stop_gradient) u += inv_by * (yc - g);
    if (cfg.lambda_y > 0.0 || !cfg.stop_gradient) omega_y.second_order(u, grad_omega);
  });
  axpy(-inv_by, primal, grad_theta);
  t.term_y *= inv_by;
  t.r_y *= inv_by;

  // X side: xhat = grad psi(x), h = grad psibar(xhat).
  std::fill(primal.begin(), primal.end(), 0.0);
  for_each_chunk(x.points.cols(), [&](Index begin, Index count) {
    const MatrixXd xc = x.points.middleCols(begin, count);
    const BatchPass theta_x(theta, xc);
    t.term_x += theta_x.values().sum();
    const MatrixXd xhat = theta_x.input_gradient();
    const BatchPass omega_xhat(omega, xhat);
    const MatrixXd h = omega_xhat.input_gradient();
    if (cfg.lambda_x > 0.0) {
      const MatrixXd v = (cfg.lambda_x * inv_bx) * (h - xc);
      const auto so = omega_xhat.second_order(v, grad_omega);
      theta_x.second_order(so.input_hvp, grad_theta, primal);
    } else {
      theta_x.backward(VectorXd(), primal);
    }
    t.r_x += (h - xc).colwise().squaredNorm().sum();
  });
  axpy(inv_bx, primal, grad_theta);
  t.term_x *= inv_bx;
  t.r_x *= inv_bx;

  if (cfg.l1_penalty > 0.0) {
    icnn::add_l1_subgradient(theta, cfg.l1_penalty, grad_theta);
    icnn::add_l1_subgradient(omega, cfg.l1_penalty, grad_omega);
  }
  return finish(t, theta, omega, cfg);
}

}  // namespace w2gn::train
