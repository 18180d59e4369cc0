#include "w2gn/train/trainer.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <memory>

#include "w2gn/errors.hpp"
#include "w2gn/icnn/batch_pass.hpp"
#include "w2gn/train/inversion.hpp"
#include "w2gn/util/allocator.hpp"

namespace w2gn::train {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using icnn::BatchPass;
using Clock = std::chrono::steady_clock;

SampleBatch draw(const Sampler& sampler, std::size_t n, data::Rng& rng, double sigma) {
  SampleBatch b = sampler.draw(n, rng);
  if (sigma > 0.0) data::add_gaussian_noise(b, sigma, rng);
  return b;
}

double sample_variance(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

void check_samplers(const TrainConfig& cfg, const Sampler& p, const Sampler& q) {
  if (p.dim() != cfg.spec.input_dim || q.dim() != cfg.spec.input_dim) {
    throw ConfigError(fmt::format("samplers must be {}-dimensional to match the network (got {} and {})",
                                  cfg.spec.input_dim, p.dim(), q.dim()));
  }
}

void finite_grad_or_throw(std::span<const double> g, std::size_t iteration) {
  for (double v : g) {
    if (!std::isfinite(v)) throw TrainingError("non-finite parameter gradient", iteration);
  }
}

// Pretrains psi_theta on a half-and-half mix of P and Q and copies it to omega.
TrainState make_initial_state(const TrainConfig& cfg, const Sampler& p, const Sampler& q, double& pretrain_mse) {
  DenseICNN theta = icnn::init(cfg.spec, derive_seed(cfg.seed, init_stream));
  pretrain_mse = 0.0;
  if (cfg.pretrain_iters > 0) {
    const auto no_delete = [](const Sampler*) {};
    const data::MixtureSampler mix(std::shared_ptr<const Sampler>(&p, no_delete),
                                   std::shared_ptr<const Sampler>(&q, no_delete));
    data::Rng rng(derive_seed(cfg.seed, pretrain_stream));
    pretrain_mse =
        pretrain_identity(theta, mix, cfg.pretrain_iters, cfg.pretrain_lr, cfg.pretrain_batch_size, rng, cfg).final_mse;
  }
  DenseICNN omega = theta;
  TrainState state(std::move(theta), std::move(omega), cfg);
  return state;
}

// Shared driver: evaluation batches, logging, checkpoints, timing.
template <class Step, class Inverse>
void run_loop(const TrainConfig& cfg, const Sampler& p, const Sampler& q, const RunOptions& options,
              TrainState& state, RunReport& report, Step&& step, Inverse&& inverse) {
  const auto [x_eval, y_eval] = evaluation_batches(cfg, p, q);
  double train_seconds = 0.0;
  double last_loss = 0.0;

  const auto log = [&] {
    LogRecord r = evaluate_pair(state.theta, inverse(state), x_eval, y_eval, cfg.lambda_y);
    r.iteration = state.iteration;
    r.loss = last_loss;
    r.wall_seconds = train_seconds;
    report.records.push_back(r);
    if (options.on_log) options.on_log(state, r);
  };

  log();
  while (state.iteration < cfg.iters) {
    const auto t0 = Clock::now();
    try {
      last_loss = step(state);
    } catch (const TrainingError&) {
      if (options.on_abort) options.on_abort(state, report);
      throw;
    } catch (const NumericError& e) {
      if (options.on_abort) options.on_abort(state, report);
      throw TrainingError(e.what(), state.iteration);
    }
    train_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
    const bool last = state.iteration == cfg.iters;
    if (state.iteration % cfg.log_interval == 0 || last) log();
    if (options.on_checkpoint && options.checkpoint_interval > 0 &&
        state.iteration % options.checkpoint_interval == 0 && !last) {
      options.on_checkpoint(state);
    }
  }
  if (options.on_checkpoint) options.on_checkpoint(state);

  report.iterations = state.iteration;
  report.wall_seconds = train_seconds;
  report.seconds_per_iteration = state.iteration > 0 ? train_seconds / static_cast<double>(state.iteration) : 0.0;
  report.corr_reference = options.corr_reference;
  if (options.corr_reference && !report.records.empty()) {
    report.corr_gap = report.records.back().corr - *options.corr_reference;
  }
}

metrics::PointMap gradient_map(const DenseICNN& net) {
  return [&net](const MatrixXd& pts) { return icnn::push_batch(net, pts); };
}

// grad += scale * sum_b d psi(points_b) / d theta
void add_scaled_backward(const DenseICNN& net, const MatrixXd& points, double scale, std::span<double> grad) {
  icnn::for_each_chunk(points.cols(), [&](Eigen::Index begin, Eigen::Index count) {
    const BatchPass pass(net, points.middleCols(begin, count));
    pass.backward(VectorXd::Constant(count, scale), grad);
  });
}

}  // namespace

// splitmix64 finalizer
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::pair<SampleBatch, SampleBatch> evaluation_batches(const TrainConfig& cfg, const Sampler& p, const Sampler& q) {
  data::Rng rng(derive_seed(cfg.seed, eval_stream));
  SampleBatch x = p.draw(cfg.eval_size, rng);
  SampleBatch y = q.draw(cfg.eval_size, rng);
  return {std::move(x), std::move(y)};
}

TrainState::TrainState(DenseICNN theta_net, DenseICNN omega_net, const TrainConfig& cfg)
    : theta(std::move(theta_net)),
      omega(std::move(omega_net)),
      adam_theta(theta.parameter_count(), cfg.adam(cfg.lr)),
      adam_omega(omega.parameter_count(), cfg.adam(cfg.lr)),
      rng(derive_seed(cfg.seed, data_stream)) {
  tune_allocator();
}

StepMetrics w2gn_step(TrainState& state, const TrainConfig& cfg, const SampleBatch& x, const SampleBatch& y) {
  icnn::ParamBuffer grad_theta(state.theta.parameter_count());
  icnn::ParamBuffer grad_omega(state.omega.parameter_count());
  StepMetrics m;
  try {
    m.terms = w2gn_objective_gradient(state.theta, state.omega, x, y, cfg, grad_theta, grad_omega);
  } catch (const NumericError& e) {
    throw TrainingError(e.what(), state.iteration);
  }
  finite_grad_or_throw(grad_theta, state.iteration);
  finite_grad_or_throw(grad_omega, state.iteration);
  state.adam_theta.step(state.theta.parameters(), grad_theta);
  m.theta_clipped = icnn::project_nonneg(state.theta);
  const bool omega_trained = cfg.lambda_y > 0.0 || cfg.lambda_x > 0.0 || !cfg.stop_gradient;
  if (omega_trained) {
    state.adam_omega.step(state.omega.parameters(), grad_omega);
    m.omega_clipped = icnn::project_nonneg(state.omega);
  }
  ++state.iteration;
  return m;
}

PretrainResult pretrain_identity(DenseICNN& net, const Sampler& sampler, std::size_t iters, double lr,
                                 std::size_t batch_size, data::Rng& rng, const TrainConfig& cfg) {
  if (sampler.dim() != net.spec().input_dim) throw ConfigError("pretraining sampler dimension mismatch");
  if (batch_size == 0) throw ConfigError("pretraining batch size must be positive");
  tune_allocator();
  optim::Adam adam(net.parameter_count(), cfg.adam(lr));
  icnn::ParamBuffer grad(net.parameter_count());
  PretrainResult result;
  const std::size_t rounds = std::max<std::size_t>(iters, 1);
  const double scale = 2.0 / static_cast<double>(batch_size);
  for (std::size_t it = 0; it < rounds; ++it) {
    const SampleBatch batch = sampler.draw(batch_size, rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    double sum = 0.0;
    icnn::for_each_chunk(batch.points.cols(), [&](Eigen::Index begin, Eigen::Index count) {
      const MatrixXd xc = batch.points.middleCols(begin, count);
      const BatchPass pass(net, xc);
      const MatrixXd diff = pass.input_gradient() - xc;
      sum += diff.colwise().squaredNorm().sum();
      if (iters > 0) pass.second_order(scale * diff, grad);
    });
    const double mse = sum / static_cast<double>(batch_size);
    if (!std::isfinite(mse)) throw TrainingError("identity pretraining diverged", it);
    result.curve.push_back(mse);
    result.final_mse = mse;
    if (iters == 0) break;
    finite_grad_or_throw(grad, it);
    adam.step(net.parameters(), grad);
    icnn::project_nonneg(net);
  }
  return result;
}

LogRecord evaluate_pair(const DenseICNN& theta, const metrics::PointMap& inverse, const SampleBatch& x,
                        const SampleBatch& y, double lambda_y) {
  LogRecord r;
  const MatrixXd yhat = inverse(y.points);
  const VectorXd a = icnn::icnn_forward_batch(theta, x.points);
  const MatrixXd xhat = icnn::push_batch(theta, x.points);
  const VectorXd psi_yhat = icnn::icnn_forward_batch(theta, yhat);
  const MatrixXd g = icnn::push_batch(theta, yhat);

  const VectorXd cyc = (g - y.points).colwise().squaredNorm().transpose();
  const VectorXd b = yhat.cwiseProduct(y.points).colwise().sum().transpose() - psi_yhat;
  const VectorXd b_reg = b + 0.5 * lambda_y * cyc;
  r.term_x = a.mean();
  r.term_y = b.mean();
  r.r_y = cyc.mean();
  r.corr = r.term_x + b_reg.mean();
  r.corr_std_error = std::sqrt(sample_variance(a) / static_cast<double>(a.size()) +
                               sample_variance(b_reg) / static_cast<double>(b_reg.size()));
  r.r_x = (inverse(xhat) - x.points).colwise().squaredNorm().mean();
  r.energy_forward = metrics::energy_distance(SampleBatch{xhat}, y);
  r.energy_inverse = metrics::energy_distance(SampleBatch{yhat}, x);
  return r;
}

TrainResult train_w2gn(const TrainConfig& cfg, const Sampler& p, const Sampler& q, const RunOptions& options) {
  cfg.validate();
  check_samplers(cfg, p, q);
  RunReport report;
  report.method = "w2gn";
  TrainState state = make_initial_state(cfg, p, q, report.pretrain_mse);
  const auto step = [&](TrainState& s) {
    const SampleBatch x = draw(p, cfg.batch_size, s.rng, cfg.smoothing_sigma);
    const SampleBatch y = draw(q, cfg.batch_size, s.rng, cfg.smoothing_sigma);
    return w2gn_step(s, cfg, x, y).terms.loss;
  };
  const auto inverse = [](const TrainState& s) { return gradient_map(s.omega); };
  run_loop(cfg, p, q, options, state, report, step, inverse);
  return {std::move(state), std::move(report)};
}

TrainResult train_single_discriminator(const TrainConfig& cfg, const Sampler& p, const Sampler& q,
                                       const RunOptions& options) {
  cfg.validate();
  check_samplers(cfg, p, q);
  RunReport report;
  report.method = "single-disc";
  TrainState state = make_initial_state(cfg, p, q, report.pretrain_mse);
  const InversionOptions inv{cfg.invert_steps, cfg.invert_tol, cfg.invert_lr};
  icnn::ParamBuffer grad(state.theta.parameter_count());

  const auto step = [&](TrainState& s) {
    const SampleBatch x = draw(p, cfg.batch_size, s.rng, cfg.smoothing_sigma);
    const SampleBatch y = draw(q, cfg.batch_size, s.rng, cfg.smoothing_sigma);
    const InversionResult xhat = invert_gradient(s.theta, y.points, inv);
    report.inversion_warnings += xhat.unconverged;
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    add_scaled_backward(s.theta, x.points, inv_b, grad);
    add_scaled_backward(s.theta, xhat.points, -inv_b, grad);
    if (cfg.l1_penalty > 0.0) icnn::add_l1_subgradient(s.theta, cfg.l1_penalty, grad);
    finite_grad_or_throw(grad, s.iteration);
    const double loss = icnn::icnn_forward_batch(s.theta, x.points).mean() +
                        (xhat.points.cwiseProduct(y.points).colwise().sum().transpose() -
                         icnn::icnn_forward_batch(s.theta, xhat.points))
                            .mean();
    s.adam_theta.step(s.theta.parameters(), grad);
    icnn::project_nonneg(s.theta);
    ++s.iteration;
    return loss;
  };
  const auto inverse = [inv](const TrainState& s) -> metrics::PointMap {
    const DenseICNN* net = &s.theta;
    return [net, inv](const MatrixXd& pts) { return invert_gradient(*net, pts, inv).points; };
  };
  run_loop(cfg, p, q, options, state, report, step, inverse);
  state.omega = state.theta;
  return {std::move(state), std::move(report)};
}

TrainResult train_minimax_baseline(const TrainConfig& cfg, const Sampler& p, const Sampler& q,
                                   const RunOptions& options) {
  cfg.validate();
  check_samplers(cfg, p, q);
  if (cfg.inner_iters == 0) throw ConfigError("minimax baseline needs inner_iters >= 1");
  RunReport report;
  report.method = "minimax";
  TrainState state = make_initial_state(cfg, p, q, report.pretrain_mse);
  icnn::ParamBuffer grad_theta(state.theta.parameter_count());
  icnn::ParamBuffer grad_omega(state.omega.parameter_count());
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);

  const auto step = [&](TrainState& s) {
    // Inner maximization of mean <yhat, y> - psi(yhat) over omega.
    for (std::size_t k = 0; k < cfg.inner_iters; ++k) {
      const SampleBatch y = draw(q, cfg.batch_size, s.rng, cfg.smoothing_sigma);
      std::fill(grad_omega.begin(), grad_omega.end(), 0.0);
      icnn::for_each_chunk(y.points.cols(), [&](Eigen::Index begin, Eigen::Index count) {
        const MatrixXd yc = y.points.middleCols(begin, count);
        const BatchPass omega_y(s.omega, yc);
        const MatrixXd g = icnn::push_batch(s.theta, omega_y.input_gradient());
        omega_y.second_order(inv_b * (g - yc), grad_omega);  // gradient of the negated objective
      });
      if (cfg.l1_penalty > 0.0) icnn::add_l1_subgradient(s.omega, cfg.l1_penalty, grad_omega);
      finite_grad_or_throw(grad_omega, s.iteration);
      s.adam_omega.step(s.omega.parameters(), grad_omega);
      icnn::project_nonneg(s.omega);
    }
    // Outer minimization over theta with yhat held fixed.
    const SampleBatch x = draw(p, cfg.batch_size, s.rng, cfg.smoothing_sigma);
    const SampleBatch y = draw(q, cfg.batch_size, s.rng, cfg.smoothing_sigma);
    const MatrixXd yhat = icnn::push_batch(s.omega, y.points);
    std::fill(grad_theta.begin(), grad_theta.end(), 0.0);
    add_scaled_backward(s.theta, x.points, inv_b, grad_theta);
    add_scaled_backward(s.theta, yhat, -inv_b, grad_theta);
    if (cfg.l1_penalty > 0.0) icnn::add_l1_subgradient(s.theta, cfg.l1_penalty, grad_theta);
    finite_grad_or_throw(grad_theta, s.iteration);
    const double loss = icnn::icnn_forward_batch(s.theta, x.points).mean() +
                        (yhat.cwiseProduct(y.points).colwise().sum().transpose() -
                         icnn::icnn_forward_batch(s.theta, yhat))
                            .mean();
    s.adam_theta.step(s.theta.parameters(), grad_theta);
    icnn::project_nonneg(s.theta);
    ++s.iteration;
    return loss;
  };
  const auto inverse = [](const TrainState& s) { return gradient_map(s.omega); };
  run_loop(cfg, p, q, options, state, report, step, inverse);
  return {std::move(state), std::move(report)};
}

}  // namespace w2gn::train
