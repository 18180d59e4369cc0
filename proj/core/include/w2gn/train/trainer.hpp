#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "w2gn/data/toy.hpp"
#include "w2gn/icnn/dense_icnn.hpp"
#include "w2gn/metrics/transport.hpp"
#include "w2gn/optim/adam.hpp"
#include "w2gn/train/config.hpp"
#include "w2gn/train/objective.hpp"

namespace w2gn::train {

using data::Sampler;

/// Independent random streams of one run, all derived from TrainConfig::seed.
enum Stream : std::uint64_t { init_stream = 1, pretrain_stream = 2, eval_stream = 3, data_stream = 4 };

/// Seed of one stream; distinct streams give statistically unrelated generators.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// The fixed P and Q batches every log point of a run is evaluated on.
std::pair<SampleBatch, SampleBatch> evaluation_batches(const TrainConfig& cfg, const Sampler& p, const Sampler& q);

struct TrainState {
  DenseICNN theta;
  DenseICNN omega;
  optim::Adam adam_theta;
  optim::Adam adam_omega;
  std::size_t iteration = 0;
  data::Rng rng;

  TrainState(DenseICNN theta_net, DenseICNN omega_net, const TrainConfig& cfg);
};

struct StepMetrics {
  ObjectiveTerms terms;
  std::size_t theta_clipped = 0;
  std::size_t omega_clipped = 0;
};

/// One Adam step on the regularized correlations, followed by clipping of both nets.
/// When stop_gradient is on and both cycle weights are zero, omega has no
/// transport gradient and is left untouched.
StepMetrics w2gn_step(TrainState& state, const TrainConfig& cfg, const SampleBatch& x, const SampleBatch& y);

struct PretrainResult {
  double final_mse = 0.0;
  std::vector<double> curve;  // batch MSE before every update
};

/// Fits grad psi ~ identity on batches from `sampler` by Adam on mean |grad psi(x) - x|^2.
PretrainResult pretrain_identity(DenseICNN& net, const Sampler& sampler, std::size_t iters, double lr,
                                 std::size_t batch_size, data::Rng& rng, const TrainConfig& cfg = {});

struct LogRecord {
  std::size_t iteration = 0;
  double corr = 0.0;  // term_x + term_y + lambda_y/2 R_Y on the evaluation batches
  double corr_std_error = 0.0;
  double term_x = 0.0;
  double term_y = 0.0;
  double r_y = 0.0;
  double r_x = 0.0;
  double loss = 0.0;  // training-batch loss of the last step
  double energy_forward = 0.0;  // E(grad psi # P, Q)
  double energy_inverse = 0.0;  // E(inverse map # Q, P)
  double wall_seconds = 0.0;    // elapsed since the start of the main loop
};

struct RunReport {
  std::string method;
  std::vector<LogRecord> records;
  double pretrain_mse = 0.0;
  std::optional<double> corr_reference;
  std::optional<double> corr_gap;  // final corr - corr_reference
  std::size_t iterations = 0;
  double wall_seconds = 0.0;
  double seconds_per_iteration = 0.0;
  std::size_t inversion_warnings = 0;  // single-disc: targets whose inversion missed the tolerance
};

/// Evaluation batches and hooks shared by all training procedures.
struct RunOptions {
  std::optional<double> corr_reference;
  std::size_t checkpoint_interval = 0;
  /// Called at every log point and at the end of training.
  std::function<void(const TrainState&, const LogRecord&)> on_log;
  /// Called every checkpoint_interval iterations and at the end of training.
  std::function<void(const TrainState&)> on_checkpoint;
  /// Called with the partial report before a TrainingError propagates.
  std::function<void(const TrainState&, const RunReport&)> on_abort;
};

struct TrainResult {
  TrainState state;
  RunReport report;
};

/// Evaluation of a forward map grad psi and an inverse map on fixed batches.
LogRecord evaluate_pair(const DenseICNN& theta, const metrics::PointMap& inverse, const SampleBatch& x,
                        const SampleBatch& y, double lambda_y);

TrainResult train_w2gn(const TrainConfig& cfg, const Sampler& p, const Sampler& q, const RunOptions& options = {});

/// Single convex discriminator; every step inverts grad psi on the Y batch.
/// The state's omega is an unused copy of theta.
TrainResult train_single_discriminator(const TrainConfig& cfg, const Sampler& p, const Sampler& q,
                                       const RunOptions& options = {});

/// Alternating max over omega (inner_iters steps on fresh Y batches) and min over theta.
TrainResult train_minimax_baseline(const TrainConfig& cfg, const Sampler& p, const Sampler& q,
                                   const RunOptions& options = {});

}  // namespace w2gn::train
