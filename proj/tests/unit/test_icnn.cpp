#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"
#include "w2gn/ad/finite_diff.hpp"
#include "w2gn/data/toy.hpp"
#include "w2gn/errors.hpp"
#include "w2gn/icnn/batch_pass.hpp"
#include "w2gn/icnn/dense_icnn.hpp"
#include "w2gn/train/trainer.hpp"

namespace w2gn {
namespace {

using icnn::DenseICNN;
using icnn::DenseICNNSpec;

DenseICNNSpec single_layer(std::size_t rank) {
  DenseICNNSpec spec;
  spec.input_dim = 2;
  spec.rank = rank;
  spec.widths = {1};
  spec.beta = 0.0;
  return spec;
}

void set(DenseICNN& net, const icnn::ParamRange& range, std::initializer_list<double> values) {
  ASSERT_EQ(range.size(), values.size());
  std::copy(values.begin(), values.end(), net.parameters().begin() + static_cast<std::ptrdiff_t>(range.begin));
}

TEST(Spec, RejectsRankAboveDimension) {
  DenseICNNSpec spec;
  spec.input_dim = 2;
  spec.rank = 3;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Spec, RejectsEmptyWidths) {
  DenseICNNSpec spec;
  spec.widths.clear();
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Spec, ParameterCountMatchesLayerShapes) {
  DenseICNNSpec spec;  // [2; 128, 128, 64], D = 2
  const std::size_t d = 2, r = 2;
  const std::vector<std::size_t> h{128, 128, 64};
  std::size_t expected = 0;
  for (std::size_t w : h) expected += w * r * d + w * d + w;
  expected += 128 * 128 + 128;
  expected += 64 * 128 + 64;
  expected += 64 + 1;
  EXPECT_EQ(spec.parameter_count(), expected);
  EXPECT_EQ(DenseICNN(spec).parameter_count(), expected);
  EXPECT_EQ(spec.quadratic_parameter_count(), (128 + 128 + 64) * r * d);
}

TEST(ConvexQuadratic, IdentityFactorGivesSquaredNorm) {
  DenseICNN net(single_layer(2));
  set(net, net.layout().quadratic[0].factors, {1, 0, 0, 1});
  const std::vector<double> x{3, 4};
  EXPECT_DOUBLE_EQ(icnn::cq_forward(net.quadratic(0), x)[0], 25.0);
}

TEST(ConvexQuadratic, RankOneWithLinearAndOffset) {
  DenseICNN net(single_layer(1));
  set(net, net.layout().quadratic[0].factors, {1, 0});
  set(net, net.layout().quadratic[0].linear, {0, 1});
  set(net, net.layout().quadratic[0].offset, {2});
  const std::vector<double> x{3, 4};
  EXPECT_DOUBLE_EQ(icnn::cq_forward(net.quadratic(0), x)[0], 15.0);
}

TEST(ConvexQuadratic, ConstantLayer) {
  DenseICNN net(single_layer(1));
  set(net, net.layout().quadratic[0].offset, {7});
  const std::vector<double> x{-2.5, 11};
  EXPECT_DOUBLE_EQ(icnn::cq_forward(net.quadratic(0), x)[0], 7.0);
}

TEST(ConvexQuadratic, DimensionMismatch) {
  DenseICNN net(single_layer(1));
  const std::vector<double> x{1, 2, 3};
  EXPECT_THROW(icnn::cq_forward(net.quadratic(0), x), ConfigError);
}

TEST(Forward, ZeroWeightsLeaveBiasAndQuadratic) {
  DenseICNNSpec spec;
  spec.beta = 2.0;
  DenseICNN net(spec);
  net.parameters()[net.layout().output_layer().bias.begin] = 0.75;
  const std::vector<double> x{1, 1};
  EXPECT_DOUBLE_EQ(icnn::icnn_forward(net, x), 0.75 + 2.0);
}

TEST(Forward, CeluIsIdentityOnPositives) {
  DenseICNN net(single_layer(2));
  set(net, net.layout().quadratic[0].factors, {1, 0, 0, 1});
  set(net, net.layout().output_layer().weights, {1});
  const std::vector<double> x{1, 0};
  EXPECT_DOUBLE_EQ(icnn::icnn_forward(net, x), 1.0);
}

// Straight-line forward pass over the flat parameter vector, written against the layout comment only.
double reference_forward(const DenseICNN& net, const std::vector<double>& x) {
  const auto& s = net.spec();
  const auto p = net.parameters();
  const std::size_t d = s.input_dim, r = s.rank;
  std::size_t off = 0;
  std::vector<std::vector<double>> cq(s.widths.size());
  for (std::size_t k = 0; k < s.widths.size(); ++k) {
    const std::size_t h = s.widths[k];
    cq[k].assign(h, 0.0);
    for (std::size_t n = 0; n < h; ++n) {
      for (std::size_t j = 0; j < r; ++j) {
        double fx = 0.0;
        for (std::size_t i = 0; i < d; ++i) fx += p[off + (n * r + j) * d + i] * x[i];
        cq[k][n] += fx * fx;
      }
    }
    off += h * r * d;
    for (std::size_t n = 0; n < h; ++n)
      for (std::size_t i = 0; i < d; ++i) cq[k][n] += p[off + n * d + i] * x[i];
    off += h * d;
    for (std::size_t n = 0; n < h; ++n) cq[k][n] += p[off + n];
    off += h;
  }
  auto celu = [](double v) { return v > 0 ? v : std::exp(v) - 1.0; };
  std::vector<double> z(s.widths[0]);
  for (std::size_t n = 0; n < z.size(); ++n) z[n] = celu(cq[0][n]);
  for (std::size_t k = 1; k < s.widths.size(); ++k) {
    const std::size_t h = s.widths[k], in = s.widths[k - 1];
    std::vector<double> next(h);
    for (std::size_t n = 0; n < h; ++n) {
      double a = 0.0;
      for (std::size_t m = 0; m < in; ++m) a += p[off + n * in + m] * z[m];
      a += p[off + h * in + n];
      next[n] = celu(a + cq[k][n]);
    }
    off += h * in + h;
    z = std::move(next);
  }
  double out = 0.0;
  for (std::size_t m = 0; m < z.size(); ++m) out += p[off + m] * z[m];
  out += p[off + z.size()];
  double sq = 0.0;
  for (double v : x) sq += v * v;
  return out + 0.5 * s.beta * sq;
}

TEST(Forward, MatchesStraightLineReference) {
  const DenseICNNSpec spec{2, 2, {16, 16}, 1e-6, 1.0};
  const auto net = testing::random_net(spec, 21);
  const std::vector<double> x{0.5, -0.5};
  EXPECT_NEAR(icnn::icnn_forward(net, x), reference_forward(net, x), 1e-12 * (1.0 + std::abs(reference_forward(net, x))));
}

TEST(Forward, BatchMatchesPointwise) {
  const DenseICNNSpec spec{3, 2, {8, 8, 4}, 1e-3, 1.0};
  const auto net = testing::random_net(spec, 4);
  const auto x = testing::gaussian_batch(3, 600, 5);
  const Eigen::VectorXd batch = icnn::icnn_forward_batch(net, x.points);
  const Eigen::MatrixXd grads = icnn::push_batch(net, x.points);
  for (Eigen::Index b = 0; b < x.points.cols(); b += 37) {
    const std::vector<double> xb(x.points.col(b).data(), x.points.col(b).data() + 3);
    EXPECT_NEAR(batch[b], icnn::icnn_forward(net, xb), 1e-10 * (1.0 + std::abs(batch[b])));
    const auto g = icnn::push(net, xb);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(grads(static_cast<Eigen::Index>(i), b), g[i], 1e-10);
  }
}

TEST(Forward, NonFiniteOutputIsNumericError) {
  DenseICNN net(single_layer(1));
  set(net, net.layout().quadratic[0].factors, {1e200, 0});
  set(net, net.layout().output_layer().weights, {1});
  const std::vector<double> x{1e200, 0};
  EXPECT_THROW(icnn::icnn_forward(net, x), NumericError);
}

TEST(Push, QuadraticIsIdentity) {
  const auto net = testing::quadratic_net(2, 1.0);
  const auto x = testing::gaussian_batch(2, 20, 3, 4.0);
  const Eigen::MatrixXd g = icnn::push_batch(net, x.points);
  EXPECT_EQ(g, x.points);
}

TEST(Push, CeluOfFirstCoordinate) {
  DenseICNN net(single_layer(1));
  set(net, net.layout().quadratic[0].linear, {1, 0});
  set(net, net.layout().output_layer().weights, {1});
  const auto g = icnn::push(net, std::vector<double>{0.5, -0.5});
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
}

TEST(Push, MatchesFiniteDifferences) {
  const DenseICNNSpec spec{2, 2, {16, 16, 8}, 1e-3, 1.0};
  const auto net = testing::random_net(spec, 8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto xb = testing::gaussian_batch(2, 1, 40 + trial);
    const std::vector<double> x(xb.points.data(), xb.points.data() + 2);
    const auto g = icnn::push(net, x);
    const auto fd = ad::finite_diff_gradient([&](std::span<const double> v) { return icnn::icnn_forward(net, v); },
                                             x, 1e-4);
    EXPECT_LT(testing::relative_error(g, fd), 1e-5);
  }
}

TEST(BatchPass, HvpMatchesFiniteDifferencesOfPush) {
  const DenseICNNSpec spec{3, 2, {10, 8, 6}, 1e-2, 1.0};
  const auto net = testing::random_net(spec, 12);
  const auto x = testing::gaussian_batch(3, 9, 13);
  const auto v = testing::gaussian_batch(3, 9, 14);
  const icnn::BatchPass pass(net, x.points);
  const auto so = pass.second_order(v.points, {});
  const double h = 1e-5;
  const Eigen::MatrixXd fd =
      (icnn::push_batch(net, x.points + h * v.points) - icnn::push_batch(net, x.points - h * v.points)) / (2 * h);
  EXPECT_LT((so.input_hvp - fd).norm() / fd.norm(), 1e-6);
  EXPECT_LT((so.input_gradient - pass.input_gradient()).norm(), 1e-12 * (1.0 + so.input_gradient.norm()));
}

TEST(BatchPass, RejectsWrongDimension) {
  const auto net = testing::quadratic_net(2, 1.0);
  EXPECT_THROW(icnn::BatchPass(net, Eigen::MatrixXd::Zero(3, 4)), ConfigError);
}

TEST(ProjectNonneg, ClampsNegativeWeightsOnly) {
  DenseICNNSpec spec{2, 1, {3, 2}, 0.0, 1.0};
  auto net = icnn::init(spec, 1);
  const auto& pl = net.layout().positive[0];
  net.parameters()[pl.weights.begin] = -0.3;
  net.parameters()[pl.bias.begin] = -0.7;
  net.parameters()[net.layout().quadratic[1].linear.begin] = -0.2;
  EXPECT_EQ(icnn::project_nonneg(net), 1u);
  EXPECT_EQ(net.parameters()[pl.weights.begin], 0.0);
  EXPECT_EQ(net.parameters()[pl.bias.begin], -0.7);
  EXPECT_EQ(net.parameters()[net.layout().quadratic[1].linear.begin], -0.2);
}

TEST(ProjectNonneg, IdempotentOnFeasibleNet) {
  auto net = icnn::init(DenseICNNSpec{}, 3);
  const auto before = net;
  EXPECT_EQ(icnn::project_nonneg(net), 0u);
  EXPECT_TRUE(net == before);
}

TEST(Init, DeterministicInSeed) {
  const auto a = icnn::init(DenseICNNSpec{}, 17);
  const auto b = icnn::init(DenseICNNSpec{}, 17);
  const auto c = icnn::init(DenseICNNSpec{}, 18);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Init, RangesFollowTheScheme) {
  const DenseICNNSpec spec{3, 2, {32, 16}, 1e-6, 1.0};
  const auto net = icnn::init(spec, 2);
  const auto p = net.parameters();
  const auto& l = net.layout();
  for (std::size_t k = 0; k < l.quadratic.size(); ++k) {
    const auto& q = l.quadratic[k];
    for (std::size_t i = q.factors.begin; i < q.factors.end; ++i) EXPECT_LE(std::abs(p[i]), 1.0 / std::sqrt(6.0));
    for (std::size_t i = q.linear.begin; i < q.linear.end; ++i) EXPECT_LE(std::abs(p[i]), 1.0 / std::sqrt(3.0));
    for (std::size_t i = q.offset.begin; i < q.offset.end; ++i) EXPECT_EQ(p[i], 0.0);
  }
  for (const auto& pl : l.positive) {
    for (std::size_t i = pl.weights.begin; i < pl.weights.end; ++i) {
      EXPECT_GE(p[i], 0.0);
      EXPECT_LE(p[i], 2.0 / std::sqrt(static_cast<double>(pl.inputs)));
    }
    for (std::size_t i = pl.bias.begin; i < pl.bias.end; ++i) EXPECT_EQ(p[i], 0.0);
  }
}

TEST(Convexity, FreshNetPasses) {
  const auto net = icnn::init(DenseICNNSpec{}, 5);
  std::mt19937_64 rng(1);
  EXPECT_LE(icnn::convexity_check(net, 10000, rng), 1e-9);
}

TEST(Convexity, StrongConvexityWithBeta) {
  const DenseICNNSpec spec{2, 2, {16, 16}, 0.5, 1.0};
  const auto net = testing::random_net(spec, 6);
  std::mt19937_64 rng(2);
  EXPECT_LE(icnn::strong_convexity_check(net, 10000, rng), 1e-9);
  EXPECT_LE(icnn::convexity_check(net, 10000, rng), 1e-9);
}

TEST(Convexity, NegativeWeightIsDetected) {
  // z_1 = CELU(-z_0) with z_0 = |x|^2 is concave along every ray; random pairs find it.
  DenseICNNSpec spec{2, 2, {1, 1}, 0.0, 1.0};
  DenseICNN net(spec);
  set(net, net.layout().quadratic[0].factors, {1, 0, 0, 1});
  set(net, net.layout().positive[0].weights, {-1});
  set(net, net.layout().output_layer().weights, {1});
  std::mt19937_64 rng(3);
  EXPECT_GT(icnn::convexity_check(net, 10000, rng), 1e-6);
}

TEST(Monotonicity, PushOfRandomNetIsBetaMonotone) {
  const DenseICNNSpec spec{2, 2, {16, 16, 8}, 0.25, 1.0};
  const auto net = testing::random_net(spec, 9);
  const auto x = testing::gaussian_batch(2, 200, 10, 2.0);
  const Eigen::MatrixXd g = icnn::push_batch(net, x.points);
  for (Eigen::Index i = 0; i + 1 < x.points.cols(); i += 2) {
    const Eigen::VectorXd dx = x.points.col(i) - x.points.col(i + 1);
    const double gain = (g.col(i) - g.col(i + 1)).dot(dx);
    EXPECT_GE(gain, spec.beta * dx.squaredNorm() - 1e-9);
  }
}

TEST(L1, SkipsBiasesAndOffsets) {
  DenseICNNSpec spec{2, 1, {2}, 0.0, 1.0};
  DenseICNN net(spec);
  for (auto& p : net.parameters()) p = -1.0;
  const auto& l = net.layout();
  const double penalized = static_cast<double>(l.quadratic[0].factors.size() + l.quadratic[0].linear.size() +
                                               l.output_layer().weights.size());
  EXPECT_DOUBLE_EQ(icnn::l1_norm(net), penalized);
  std::vector<double> g(net.parameter_count());
  icnn::add_l1_subgradient(net, 2.0, g);
  EXPECT_EQ(g[l.quadratic[0].factors.begin], -2.0);
  EXPECT_EQ(g[l.quadratic[0].offset.begin], 0.0);
  EXPECT_EQ(g[l.output_layer().bias.begin], 0.0);
}

TEST(Pretrain, StandardGaussianReachesLowError) {
  const DenseICNNSpec spec{2, 2, {64, 64}, 1e-6, 1.0};
  auto net = icnn::init(spec, 0);
  data::ToySampler sampler(data::ToyDistribution::standard_gaussian());
  data::Rng rng(100);
  const auto res = train::pretrain_identity(net, sampler, 2000, 1e-3, 64, rng);
  EXPECT_LT(res.final_mse, 1e-2);
}

TEST(Pretrain, IdentityNetHasZeroError) {
  auto net = testing::quadratic_net(2, 1.0);
  data::ToySampler sampler(data::ToyDistribution::standard_gaussian());
  data::Rng rng(1);
  const auto res = train::pretrain_identity(net, sampler, 0, 1e-3, 128, rng);
  ASSERT_EQ(res.curve.size(), 1u);
  EXPECT_EQ(res.final_mse, 0.0);
}

TEST(Pretrain, SameSeedSameCurve) {
  const DenseICNNSpec spec{2, 2, {8, 8}, 1e-6, 1.0};
  data::ToySampler sampler(data::ToyDistribution::standard_gaussian());
  auto run = [&] {
    auto net = icnn::init(spec, 4);
    data::Rng rng(9);
    return train::pretrain_identity(net, sampler, 50, 1e-3, 32, rng).curve;
  };
  EXPECT_EQ(run(), run());
}

TEST(Pretrain, KeepsNetConvex) {
  const DenseICNNSpec spec{2, 2, {16, 16}, 1e-6, 1.0};
  auto net = icnn::init(spec, 4);
  data::ToySampler sampler(data::ToyDistribution::ring());
  data::Rng rng(9);
  train::pretrain_identity(net, sampler, 100, 1e-2, 64, rng);
  std::mt19937_64 check(1);
  EXPECT_LE(icnn::convexity_check(net, 10000, check), 1e-9);
}

}  // namespace
}  // namespace w2gn
