#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"
#include "w2gn/data/toy.hpp"
#include "w2gn/errors.hpp"
#include "w2gn/metrics/gaussian.hpp"
#include "w2gn/metrics/transport.hpp"
#include "w2gn/train/inversion.hpp"
#include "w2gn/train/trainer.hpp"

namespace w2gn {
namespace {

using data::ToyDistribution;
using data::ToySampler;
using Eigen::MatrixXd;
using train::TrainConfig;

TrainConfig small_config(std::size_t dim = 2) {
  TrainConfig cfg;
  cfg.spec = icnn::DenseICNNSpec{dim, std::min<std::size_t>(dim, 2), {32, 32}, 1e-6, 1.0};
  cfg.batch_size = 128;
  cfg.iters = 50;
  cfg.pretrain_iters = 200;
  cfg.log_interval = 10;
  cfg.eval_size = 256;
  return cfg;
}

bool same_records(const std::vector<train::LogRecord>& a, const std::vector<train::LogRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.iteration != y.iteration || x.corr != y.corr || x.term_x != y.term_x || x.term_y != y.term_y ||
        x.r_y != y.r_y || x.r_x != y.r_x || x.loss != y.loss || x.energy_forward != y.energy_forward ||
        x.energy_inverse != y.energy_inverse)
      return false;
  }
  return true;
}

TEST(Config, DefaultsAreValid) { EXPECT_NO_THROW(TrainConfig{}.validate()); }

TEST(Config, RejectsOutOfRangeValues) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.lambda_y = -1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.lr = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.batch_size = 1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.adam_beta2 = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.spec.rank = 5; }).validate(), ConfigError);
}

TEST(Config, WarnsWhenStrongConvexityBoundIsVacuous) {
  TrainConfig c;
  EXPECT_EQ(c.warnings().size(), 1u);
  c.spec.beta = 0.5;
  c.lambda_y = 4.0;
  EXPECT_TRUE(c.warnings().empty());
}

TEST(Inversion, HalfSquaredNormIsExactInOneStep) {
  const auto net = testing::quadratic_net(2, 1.0);
  const auto y = testing::gaussian_batch(2, 30, 1, 3.0);
  const auto r = train::invert_gradient(net, y.points);
  EXPECT_TRUE(r.converged());
  EXPECT_LE(r.steps, 1u);
  EXPECT_EQ(r.points, y.points);
}

TEST(Inversion, SquaredNormHalvesTargets) {
  const auto net = testing::quadratic_net(2, 2.0);
  const auto y = testing::gaussian_batch(2, 30, 2, 3.0);
  const auto r = train::invert_gradient(net, y.points);
  EXPECT_TRUE(r.converged());
  EXPECT_LT((r.points - 0.5 * y.points).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Inversion, RandomNetResidualsBelowTolerance) {
  const auto net = testing::random_net(icnn::DenseICNNSpec{2, 2, {32, 32, 16}, 1e-2, 1.0}, 5);
  const auto x = testing::gaussian_batch(2, 200, 6);
  const MatrixXd y = icnn::push_batch(net, x.points);
  const auto r = train::invert_gradient(net, y, {200, 1e-4, 0.0});
  EXPECT_TRUE(r.converged());
  const MatrixXd back = icnn::push_batch(net, r.points);
  EXPECT_LT((back - y).colwise().norm().maxCoeff(), 1e-4);
}

TEST(Inversion, GradientAscentModeFlagsUnconverged) {
  const auto net = testing::random_net(icnn::DenseICNNSpec{2, 2, {16, 16}, 1e-2, 1.0}, 7);
  const auto y = testing::gaussian_batch(2, 20, 8, 5.0);
  const auto r = train::invert_gradient(net, y.points, {2, 1e-12, 1e-6});
  EXPECT_FALSE(r.converged());
  EXPECT_EQ(r.unconverged, 20u);
  EXPECT_EQ(r.steps, 2u);
}

TEST(Step, OmegaUntouchedWithoutCycleTerms) {
  auto cfg = small_config();
  cfg.lambda_y = 0.0;
  cfg.lambda_x = 0.0;
  cfg.stop_gradient = true;
  const auto theta = testing::random_net(cfg.spec, 1);
  const auto omega = testing::random_net(cfg.spec, 2);
  train::TrainState state(theta, omega, cfg);
  for (int i = 0; i < 3; ++i) {
    const auto x = testing::gaussian_batch(2, cfg.batch_size, 10 + i);
    const auto y = testing::gaussian_batch(2, cfg.batch_size, 20 + i, 2.0);
    train::w2gn_step(state, cfg, x, y);
  }
  EXPECT_TRUE(state.omega == omega);
  EXPECT_FALSE(state.theta == theta);
  EXPECT_EQ(state.iteration, 3u);
}

TEST(Step, OmegaMovesWhenCycleTermIsOn) {
  auto cfg = small_config();
  const auto theta = testing::random_net(cfg.spec, 1);
  const auto omega = testing::random_net(cfg.spec, 2);
  train::TrainState state(theta, omega, cfg);
  train::w2gn_step(state, cfg, testing::gaussian_batch(2, 64, 1), testing::gaussian_batch(2, 64, 2));
  EXPECT_FALSE(state.omega == omega);
}

TEST(Step, IdentityOnEqualDistributionsStaysPut) {
  auto cfg = small_config();
  const auto id = testing::quadratic_net(2, 1.0, {32, 32});
  cfg.spec = id.spec();
  train::TrainState state(id, id, cfg);
  const auto x = testing::gaussian_batch(2, 512, 1);
  const auto y = testing::gaussian_batch(2, 512, 2);
  const auto ex = testing::gaussian_batch(2, 512, 3);
  const double before = metrics::energy_distance(data::SampleBatch{icnn::push_batch(state.theta, ex.points)}, y);
  train::w2gn_step(state, cfg, x, y);
  const double after = metrics::energy_distance(data::SampleBatch{icnn::push_batch(state.theta, ex.points)}, y);
  data::Rng rng(4);
  const double null_std = metrics::energy_distance_null_std(ex, y, 200, rng);
  EXPECT_LT(std::abs(after - before), 3 * null_std);
}

TEST(Step, ProjectionKeepsNetsConvex) {
  auto cfg = small_config();
  cfg.lr = 5e-2;
  train::TrainState state(testing::random_net(cfg.spec, 1), testing::random_net(cfg.spec, 2), cfg);
  for (int i = 0; i < 100; ++i) {
    train::w2gn_step(state, cfg, testing::gaussian_batch(2, 64, 100 + i),
                     data::sample(ToyDistribution::ring(), 64, 200 + i));
  }
  std::mt19937_64 rng(1);
  EXPECT_LE(icnn::convexity_check(state.theta, 10000, rng), 1e-9);
  EXPECT_LE(icnn::convexity_check(state.omega, 10000, rng), 1e-9);
}

TEST(Step, NonFiniteBatchIsTrainingError) {
  auto cfg = small_config();
  train::TrainState state(testing::random_net(cfg.spec, 1), testing::random_net(cfg.spec, 2), cfg);
  auto x = testing::gaussian_batch(2, 16, 1);
  x.points(0, 3) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train::w2gn_step(state, cfg, x, testing::gaussian_batch(2, 16, 2)), NumericError);
}

TEST(TrainW2gn, EqualDistributionsKeepNearIdentity) {
  auto cfg = small_config();
  cfg.iters = 300;
  cfg.batch_size = 256;
  ToySampler p(ToyDistribution::standard_gaussian());
  const auto res = train::train_w2gn(cfg, p, p);
  const auto& last = res.report.records.back();
  EXPECT_EQ(last.iteration, 300u);
  EXPECT_LT(last.r_y, 1e-2);
  EXPECT_LT(last.r_x, 1e-2);
  const auto test = data::sample(ToyDistribution::standard_gaussian(), 4096, 77);
  const MatrixXd diff = icnn::push_batch(res.state.theta, test.points) - test.points;
  EXPECT_LT(diff.colwise().squaredNorm().mean(), 1e-1);
}

TEST(TrainW2gn, DeterministicInSeed) {
  auto cfg = small_config();
  cfg.iters = 20;
  ToySampler p(ToyDistribution::standard_gaussian());
  ToySampler q(ToyDistribution::ring());
  const auto a = train::train_w2gn(cfg, p, q);
  const auto b = train::train_w2gn(cfg, p, q);
  EXPECT_TRUE(a.state.theta == b.state.theta);
  EXPECT_TRUE(a.state.omega == b.state.omega);
  EXPECT_TRUE(same_records(a.report.records, b.report.records));
  cfg.seed = 1;
  const auto c = train::train_w2gn(cfg, p, q);
  EXPECT_FALSE(a.state.theta == c.state.theta);
}

TEST(TrainW2gn, LogsAtIntervalsAndEnd) {
  auto cfg = small_config();
  cfg.iters = 25;
  cfg.log_interval = 10;
  ToySampler p(ToyDistribution::standard_gaussian());
  std::vector<std::size_t> logged, checkpoints;
  train::RunOptions opt;
  opt.checkpoint_interval = 20;
  opt.on_log = [&](const train::TrainState&, const train::LogRecord& r) { logged.push_back(r.iteration); };
  opt.on_checkpoint = [&](const train::TrainState& s) { checkpoints.push_back(s.iteration); };
  const auto res = train::train_w2gn(cfg, p, p, opt);
  EXPECT_EQ(logged, (std::vector<std::size_t>{0, 10, 20, 25}));
  EXPECT_EQ(checkpoints, (std::vector<std::size_t>{20, 25}));
  EXPECT_EQ(res.report.iterations, 25u);
  EXPECT_EQ(res.report.method, "w2gn");
}

TEST(TrainW2gn, RejectsDimensionMismatch) {
  auto cfg = small_config();
  ToySampler p(ToyDistribution::standard_gaussian(3));
  EXPECT_THROW(train::train_w2gn(cfg, p, p), ConfigError);
}

TEST(TrainW2gn, DivergenceReportsPartialRun) {
  auto cfg = small_config();
  cfg.iters = 200;
  cfg.lr = 1e30;  // Adam steps are lr-sized, so only an absurd rate overflows
  cfg.pretrain_iters = 0;
  ToySampler p(ToyDistribution::standard_gaussian());
  ToySampler q(ToyDistribution::ring(8, 1e3, 1.0));
  bool aborted = false;
  train::RunOptions opt;
  opt.on_abort = [&](const train::TrainState&, const train::RunReport& r) {
    aborted = true;
    EXPECT_FALSE(r.records.empty());
  };
  EXPECT_THROW(train::train_w2gn(cfg, p, q, opt), TrainingError);
  EXPECT_TRUE(aborted);
}

TEST(SingleDiscriminator, LearnsOneDimensionalShift) {
  TrainConfig cfg = small_config(1);
  cfg.spec = icnn::DenseICNNSpec{1, 1, {16, 16}, 1e-6, 1.0};
  cfg.iters = 400;
  cfg.batch_size = 256;
  cfg.lr = 1e-2;
  ToySampler p(ToyDistribution::standard_gaussian(1));
  metrics::GaussianSpec target{Eigen::VectorXd::Constant(1, 2.0), MatrixXd::Identity(1, 1)};
  ToySampler q(ToyDistribution::normal(target));
  const auto res = train::train_single_discriminator(cfg, p, q);
  const auto test = data::sample(ToyDistribution::standard_gaussian(1), 2000, 5);
  const MatrixXd err = icnn::push_batch(res.state.theta, test.points) - (test.points.array() + 2.0).matrix();
  EXPECT_LT(err.cwiseAbs().mean(), 0.1);
  EXPECT_TRUE(res.state.omega == res.state.theta);
  EXPECT_EQ(res.report.method, "single-disc");
}

TEST(SingleDiscriminator, EqualDistributionsStayNearIdentity) {
  auto cfg = small_config();
  cfg.iters = 100;
  ToySampler p(ToyDistribution::standard_gaussian());
  const auto res = train::train_single_discriminator(cfg, p, p);
  const auto test = data::sample(ToyDistribution::standard_gaussian(), 2000, 5);
  const MatrixXd diff = icnn::push_batch(res.state.theta, test.points) - test.points;
  EXPECT_LT(diff.colwise().squaredNorm().mean(), 1e-1);
}

TEST(Minimax, CycleWeightPlaysNoRole) {
  auto cfg = small_config();
  cfg.iters = 10;
  cfg.inner_iters = 3;
  ToySampler p(ToyDistribution::standard_gaussian());
  ToySampler q(ToyDistribution::swiss_roll());
  const auto a = train::train_minimax_baseline(cfg, p, q);
  auto cfg2 = cfg;
  cfg2.lambda_y = 35000.0;
  const auto b = train::train_minimax_baseline(cfg2, p, q);
  EXPECT_TRUE(a.state.theta == b.state.theta);
  EXPECT_TRUE(a.state.omega == b.state.omega);
  for (std::size_t i = 0; i < a.report.records.size(); ++i) {
    EXPECT_EQ(a.report.records[i].loss, b.report.records[i].loss);
    EXPECT_EQ(a.report.records[i].energy_forward, b.report.records[i].energy_forward);
  }
}

TEST(Minimax, EqualDistributionsStayNearIdentity) {
  auto cfg = small_config();
  cfg.iters = 100;
  cfg.inner_iters = 3;
  ToySampler p(ToyDistribution::standard_gaussian());
  const auto res = train::train_minimax_baseline(cfg, p, p);
  const auto test = data::sample(ToyDistribution::standard_gaussian(), 2000, 5);
  const MatrixXd fwd = icnn::push_batch(res.state.theta, test.points) - test.points;
  const MatrixXd inv = icnn::push_batch(res.state.omega, test.points) - test.points;
  EXPECT_LT(fwd.colwise().squaredNorm().mean(), 1e-1);
  EXPECT_LT(inv.colwise().squaredNorm().mean(), 1e-1);
}

TEST(Minimax, RejectsZeroInnerIterations) {
  auto cfg = small_config();
  cfg.inner_iters = 0;
  ToySampler p(ToyDistribution::standard_gaussian());
  EXPECT_THROW(train::train_minimax_baseline(cfg, p, p), ConfigError);
}

TEST(Evaluation, GaussianRunReportsReferenceGap) {
  auto cfg = small_config();
  cfg.iters = 10;
  ToySampler p(ToyDistribution::standard_gaussian());
  train::RunOptions opt;
  opt.corr_reference = 2.0;
  const auto res = train::train_w2gn(cfg, p, p, opt);
  ASSERT_TRUE(res.report.corr_gap.has_value());
  EXPECT_DOUBLE_EQ(*res.report.corr_gap, res.report.records.back().corr - 2.0);
}

}  // namespace
}  // namespace w2gn
