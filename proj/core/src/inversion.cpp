#include "w2gn/train/inversion.hpp"

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include <vector>

#include "w2gn/errors.hpp"
#include "w2gn/icnn/batch_pass.hpp"

namespace w2gn::train {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd gather(const MatrixXd& m, const std::vector<Index>& cols) {
  MatrixXd out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

// Concave objective <x, y> - psi(x) per column.
VectorXd dual_objective(const MatrixXd& x, const MatrixXd& y, const VectorXd& psi) {
  return x.cwiseProduct(y).colwise().sum().transpose() - psi;
}

// Newton directions (H + mu I)^{-1} r per column, with Hessians assembled from D HVPs.
MatrixXd newton_directions(const icnn::BatchPass& pass, const MatrixXd& residual) {
  const Index d = residual.rows();
  const Index n = residual.cols();
  std::vector<MatrixXd> hv(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) {
    MatrixXd e = MatrixXd::Zero(d, n);
    e.row(i).setOnes();
    hv[static_cast<std::size_t>(i)] = pass.second_order(e, {}).input_hvp;
  }
  MatrixXd out(d, n);
  MatrixXd h(d, d);
  for (Index b = 0; b < n; ++b) {
    for (Index i = 0; i < d; ++i) h.col(i) = hv[static_cast<std::size_t>(i)].col(b);
    h = 0.5 * (h + h.transpose()).eval();
    const double mu = 1e-12 * (1.0 + h.trace());
    h.diagonal().array() += mu;
    const Eigen::LDLT<MatrixXd> ldlt(h);
    VectorXd step = ldlt.solve(residual.col(b));
    // Fall back to the ascent direction if the factorization is unusable.
    if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(residual.col(b)) <= 0.0) {
      step = residual.col(b);
    }
    out.col(b) = step;
  }
  return out;
}

}  // namespace

InversionResult invert_gradient(const icnn::DenseICNN& net, const MatrixXd& targets,
                                const InversionOptions& options) {
  if (targets.rows() != static_cast<Index>(net.spec().input_dim)) {
    throw ConfigError(fmt::format("inversion targets must be {}-dimensional", net.spec().input_dim));
  }
  if (options.tolerance <= 0.0) throw ConfigError("inversion tolerance must be positive");
  if (options.lr < 0.0) throw ConfigError("inversion step size must be nonnegative");

  InversionResult result;
  result.points = targets;
  std::vector<Index> active(static_cast<std::size_t>(targets.cols()));
  for (std::size_t j = 0; j < active.size(); ++j) active[j] = static_cast<Index>(j);

  for (std::size_t step = 0; step < options.max_steps && !active.empty(); ++step) {
    const MatrixXd x = gather(result.points, active);
    const MatrixXd y = gather(targets, active);
    const icnn::BatchPass pass(net, x);
    const MatrixXd residual = y - pass.input_gradient();
    const VectorXd norms = residual.colwise().norm();

    std::vector<Index> still;
    std::vector<Index> local;
    for (std::size_t j = 0; j < active.size(); ++j) {
      if (norms[static_cast<Index>(j)] > options.tolerance) {
        still.push_back(active[j]);
        local.push_back(static_cast<Index>(j));
      }
    }
    if (still.empty()) break;
    result.steps = step + 1;

    if (options.lr > 0.0) {
      for (std::size_t k = 0; k < still.size(); ++k) {
        result.points.col(still[k]) += options.lr * residual.col(local[k]);
      }
    } else {
      const MatrixXd r = gather(residual, local);
      const MatrixXd xs = gather(x, local);
      const MatrixXd ys = gather(y, local);
      const MatrixXd dir = newton_directions(pass, residual)(Eigen::all, local);
      VectorXd psi(static_cast<Index>(local.size()));
      for (std::size_t k = 0; k < local.size(); ++k) psi[static_cast<Index>(k)] = pass.values()[local[k]];
      const VectorXd f0 = dual_objective(xs, ys, psi);
      const VectorXd slope = dir.cwiseProduct(r).colwise().sum().transpose();

      // Backtracking (Armijo) per column.
      VectorXd t = VectorXd::Ones(static_cast<Index>(local.size()));
      std::vector<Index> pending(local.size());
      for (std::size_t k = 0; k < pending.size(); ++k) pending[k] = static_cast<Index>(k);
      for (int halvings = 0; halvings < 40 && !pending.empty(); ++halvings) {
        MatrixXd trial(xs.rows(), static_cast<Index>(pending.size()));
        for (std::size_t k = 0; k < pending.size(); ++k) {
          trial.col(static_cast<Index>(k)) = xs.col(pending[k]) + t[pending[k]] * dir.col(pending[k]);
        }
        const VectorXd f = dual_objective(trial, gather(ys, pending), icnn::icnn_forward_batch(net, trial));
        std::vector<Index> rejected;
        for (std::size_t k = 0; k < pending.size(); ++k) {
          const Index c = pending[k];
          if (!(f[static_cast<Index>(k)] >= f0[c] + 1e-4 * t[c] * slope[c])) {
            t[c] *= 0.5;
            rejected.push_back(c);
          }
        }
        pending = std::move(rejected);
      }
      for (Index c : pending) t[c] = 0.0;  // no acceptable step; keep the point
      for (std::size_t k = 0; k < still.size(); ++k) {
        result.points.col(still[k]) += t[static_cast<Index>(k)] * dir.col(static_cast<Index>(k));
      }
    }
    active = std::move(still);
  }

  const MatrixXd final_grad = icnn::push_batch(net, result.points);
  result.residuals = (final_grad - targets).colwise().norm().transpose();
  for (Index j = 0; j < result.residuals.size(); ++j) {
    if (!(result.residuals[j] <= options.tolerance)) ++result.unconverged;
  }
  return result;
}

}  // namespace w2gn::train
