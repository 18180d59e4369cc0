#pragma once

// Regularized correlations of a primal/conjugate pair (psi_theta, psibar_omega)
// over mini-batches X ~ P and Y ~ Q:
//
//   term_x = mean_x psi(x)
//   term_y = mean_y <yhat, y> - psi(yhat),        yhat = grad psibar(y)
//   R_Y    = mean_y |grad psi(yhat) - y|^2
//   R_X    = mean_x |grad psibar(grad psi(x)) - x|^2
//   loss   = term_x + term_y + lambda_y/2 R_Y + lambda_x/2 R_X + l1 (|theta|_1 + |omega|_1)

#include <span>
#include <utility>

#include "w2gn/data/sample_batch.hpp"
#include "w2gn/icnn/dense_icnn.hpp"
#include "w2gn/train/config.hpp"

namespace w2gn::train {

using data::SampleBatch;
using icnn::DenseICNN;

struct CorrTerms {
  double term_x = 0.0;
  double term_y = 0.0;
};

CorrTerms corr_terms(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x, const SampleBatch& y);
double cycle_reg_y(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& y);
double cycle_reg_x(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x);

struct ObjectiveTerms {
  double term_x = 0.0;
  double term_y = 0.0;
  double r_y = 0.0;
  double r_x = 0.0;
  double l1 = 0.0;  // penalty already multiplied by l1_penalty
  double loss = 0.0;
};

ObjectiveTerms w2gn_objective(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x,
                              const SampleBatch& y, const TrainConfig& cfg);

/// Objective value plus parameter gradients (overwritten). With
/// cfg.stop_gradient the omega gradient ignores term_y and comes from the cycle
/// terms and the L1 penalty only.
ObjectiveTerms w2gn_objective_gradient(const DenseICNN& theta, const DenseICNN& omega, const SampleBatch& x,
                                       const SampleBatch& y, const TrainConfig& cfg, std::span<double> grad_theta,
                                       std::span<double> grad_omega);

}  // namespace w2gn::train
