#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "support.hpp"
#include "w2gn/data/toy.hpp"
#include "w2gn/errors.hpp"
#include "w2gn/icnn/dense_icnn.hpp"
#include "w2gn/metrics/assignment.hpp"
#include "w2gn/metrics/gaussian.hpp"
#include "w2gn/metrics/transport.hpp"

namespace w2gn {
namespace {

using data::SampleBatch;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using metrics::GaussianSpec;

SampleBatch line(std::initializer_list<double> values) {
  SampleBatch b{MatrixXd(1, static_cast<Eigen::Index>(values.size()))};
  Eigen::Index i = 0;
  for (double v : values) b.points(0, i++) = v;
  return b;
}

double brute_force_w2(const SampleBatch& x, const SampleBatch& y) {
  std::vector<std::size_t> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i)
      c += 0.5 * (x.points.col(static_cast<Eigen::Index>(i)) - y.points.col(static_cast<Eigen::Index>(perm[i])))
                     .squaredNorm();
    best = std::min(best, c / static_cast<double>(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

GaussianSpec random_gaussian(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  GaussianSpec g;
  g.mean = VectorXd(static_cast<Eigen::Index>(dim));
  for (auto& v : g.mean) v = n01(rng);
  MatrixXd a(dim, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n01(rng);
  g.covariance = a * a.transpose() / static_cast<double>(dim) + 0.5 * MatrixXd::Identity(dim, dim);
  return g;
}

TEST(Assignment, SolvesSmallMatrix) {
  MatrixXd c(3, 3);
  c << 4, 1, 3,
       2, 0, 5,
       3, 2, 2;
  const auto a = metrics::solve_assignment(c);
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) total += c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a[i]));
  EXPECT_DOUBLE_EQ(total, 5.0);
}

TEST(Assignment, RejectsBadInput) {
  EXPECT_THROW(metrics::solve_assignment(MatrixXd::Zero(2, 3)), ConfigError);
  MatrixXd c = MatrixXd::Zero(2, 2);
  c(0, 1) = std::nan("");
  EXPECT_THROW(metrics::solve_assignment(c), NumericError);
}

TEST(EmpiricalW2, SamePointsCostNothing) {
  const auto x = testing::gaussian_batch(2, 40, 1);
  const auto r = metrics::empirical_w2(x, x);
  EXPECT_EQ(r.cost, 0.0);
}

TEST(EmpiricalW2, CrossMatchingInOneDimension) {
  const auto r = metrics::empirical_w2(line({0, 1}), line({1, 0}));
  EXPECT_EQ(r.cost, 0.0);
  EXPECT_EQ(r.assignment, (std::vector<std::size_t>{1, 0}));
}

TEST(EmpiricalW2, MatchesPermutationEnumeration) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto x = testing::gaussian_batch(2, 6, 2 * seed + 1);
    const auto y = testing::gaussian_batch(2, 6, 2 * seed + 2, 2.0);
    EXPECT_LT(std::abs(metrics::empirical_w2(x, y).cost - brute_force_w2(x, y)), 1e-12) << "seed " << seed;
  }
}

TEST(EmpiricalW2, UnequalSizesRejected) {
  EXPECT_THROW(metrics::empirical_w2(line({0, 1}), line({0})), ConfigError);
}

TEST(EmpiricalW2, SquareRootIsAMetric) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = testing::gaussian_batch(3, 30, 3 * seed + 1);
    const auto b = testing::gaussian_batch(3, 30, 3 * seed + 2, 1.5);
    const auto c = testing::gaussian_batch(3, 30, 3 * seed + 3, 0.5);
    const double ab = std::sqrt(metrics::empirical_w2(a, b).cost);
    const double bc = std::sqrt(metrics::empirical_w2(b, c).cost);
    const double ac = std::sqrt(metrics::empirical_w2(a, c).cost);
    EXPECT_LE(ac, ab + bc + 1e-12);
    EXPECT_NEAR(ab, std::sqrt(metrics::empirical_w2(b, a).cost), 1e-12);
  }
}

TEST(EmpiricalW2, CouplingCostAgrees) {
  const auto x = testing::gaussian_batch(2, 25, 7);
  const auto y = testing::gaussian_batch(2, 25, 8);
  const auto r = metrics::empirical_w2(x, y);
  EXPECT_NEAR(metrics::coupling_cost(x, y, r.assignment), r.cost, 1e-14);
}

TEST(GaussianW2, EqualSpecsGiveZero) {
  const auto p = random_gaussian(3, 1);
  EXPECT_NEAR(metrics::gaussian_w2(p, p), 0.0, 1e-10);
}

TEST(GaussianW2, MeanShiftInOneDimension) {
  GaussianSpec p{VectorXd::Constant(1, 0.0), MatrixXd::Identity(1, 1)};
  GaussianSpec q{VectorXd::Constant(1, 2.0), MatrixXd::Identity(1, 1)};
  EXPECT_NEAR(metrics::gaussian_w2(p, q), 2.0, 1e-14);
}

TEST(GaussianW2, EmpiricalEstimateApproachesClosedForm) {
  const auto p = random_gaussian(2, 11);
  const auto q = random_gaussian(2, 12);
  const double exact = metrics::gaussian_w2(p, q);
  std::vector<double> err;
  for (std::size_t n : {64u, 256u, 1024u}) {
    double total = 0.0;
    const int reps = n == 1024 ? 2 : 8;
    for (int rep = 0; rep < reps; ++rep) {
      const auto x = data::sample(data::ToyDistribution::normal(p), n, 100 * n + 2 * rep);
      const auto y = data::sample(data::ToyDistribution::normal(q), n, 100 * n + 2 * rep + 1);
      total += metrics::empirical_w2(x, y).cost;
    }
    err.push_back(std::abs(total / reps - exact));
  }
  EXPECT_GT(err[0], err[1]);
  EXPECT_GT(err[1], err[2]);
}

TEST(OptimalMap, EqualSpecsGiveIdentity) {
  const auto p = random_gaussian(3, 2);
  const auto t = metrics::gaussian_optimal_map(p, p);
  EXPECT_LT((t.linear - MatrixXd::Identity(3, 3)).norm(), 1e-10);
  EXPECT_LT(t.shift.norm(), 1e-10);
}

TEST(OptimalMap, OneDimensionalQuantileFormula) {
  GaussianSpec p{VectorXd::Constant(1, 0.0), MatrixXd::Identity(1, 1)};
  GaussianSpec q{VectorXd::Constant(1, 3.0), MatrixXd::Constant(1, 1, 4.0)};
  const auto t = metrics::gaussian_optimal_map(p, q);
  EXPECT_NEAR(t.linear(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(t.shift[0], 3.0, 1e-14);
}

TEST(OptimalMap, PushForwardMatchesTargetMoments) {
  const auto p = random_gaussian(2, 21);
  const auto q = random_gaussian(2, 22);
  const auto t = metrics::gaussian_optimal_map(p, q);
  const std::size_t n = 100000;
  const auto x = data::sample(data::ToyDistribution::normal(p), n, 5);
  const MatrixXd y = t(x.points);
  const VectorXd mean = y.rowwise().mean();
  const MatrixXd centered = y.colwise() - mean;
  const MatrixXd cov = centered * centered.transpose() / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const double se = std::sqrt(q.covariance(i, i) / static_cast<double>(n));
    EXPECT_LT(std::abs(mean[i] - q.mean[i]), 3 * se);
    for (Eigen::Index j = 0; j < 2; ++j) {
      // Var of a sample covariance entry: (S_ii S_jj + S_ij^2) / n.
      const double cse = std::sqrt((q.covariance(i, i) * q.covariance(j, j) + q.covariance(i, j) * q.covariance(i, j)) /
                                   static_cast<double>(n));
      EXPECT_LT(std::abs(cov(i, j) - q.covariance(i, j)), 3 * cse);
    }
  }
}

TEST(OptimalMap, LinearPartIsSymmetricPositive) {
  const auto t = metrics::gaussian_optimal_map(random_gaussian(3, 31), random_gaussian(3, 32));
  EXPECT_LT((t.linear - t.linear.transpose()).norm(), 1e-10);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(t.linear);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(GaussianSpecValidation, RejectsIndefiniteCovariance) {
  GaussianSpec g{VectorXd::Zero(2), MatrixXd::Identity(2, 2)};
  g.covariance(1, 1) = -1.0;
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(CorrReference, StandardNormalPair) {
  EXPECT_NEAR(metrics::corr_reference(GaussianSpec::standard(2), GaussianSpec::standard(2)), 2.0, 1e-12);
}

TEST(CorrReference, ShiftedOneDimensional) {
  GaussianSpec p{VectorXd::Constant(1, 0.0), MatrixXd::Identity(1, 1)};
  GaussianSpec q{VectorXd::Constant(1, 2.0), MatrixXd::Identity(1, 1)};
  EXPECT_NEAR(metrics::corr_reference(p, q), 1.0, 1e-12);
}

TEST(CorrReference, MatchesMonteCarloCorrelation) {
  const auto p = random_gaussian(2, 41);
  const auto q = random_gaussian(2, 42);
  const auto t = metrics::gaussian_optimal_map(p, q);
  const auto x = data::sample(data::ToyDistribution::normal(p), 200000, 3);
  const VectorXd inner = x.points.cwiseProduct(t(x.points)).colwise().sum().transpose();
  const double mean = inner.mean();
  const double se = std::sqrt((inner.array() - mean).square().sum() / (inner.size() - 1) / inner.size());
  EXPECT_LT(std::abs(mean - metrics::corr_reference(p, q)), 3 * se);
}

TEST(EnergyDistance, RepeatedSamePointIsZero) {
  EXPECT_EQ(metrics::energy_distance(line({2, 2, 2}), line({2, 2})), 0.0);
}

TEST(EnergyDistance, TwoPointArithmetic) {
  EXPECT_DOUBLE_EQ(metrics::energy_distance(line({0, 0}), line({1, 1})), 2.0);
}

TEST(EnergyDistance, SameDistributionWithinNullSpread) {
  const auto x = testing::gaussian_batch(2, 512, 61);
  const auto y = testing::gaussian_batch(2, 512, 62);
  data::Rng rng(1);
  const double null_std = metrics::energy_distance_null_std(x, y, 200, rng);
  EXPECT_LT(std::abs(metrics::energy_distance(x, y)), 3 * null_std);
}

TEST(EnergyDistance, DetectsShift) {
  const auto x = testing::gaussian_batch(2, 256, 63);
  auto y = testing::gaussian_batch(2, 256, 64);
  y.points.array() += 1.0;
  data::Rng rng(1);
  EXPECT_GT(metrics::energy_distance(x, y), 10 * metrics::energy_distance_null_std(x, y, 100, rng));
}

TEST(Monotonicity, ConvexPushHasNoViolations) {
  const auto net = testing::random_net(icnn::DenseICNNSpec{2, 2, {16, 16, 8}, 1e-6, 1.0}, 3);
  const metrics::PointMap push = [&](const MatrixXd& p) { return icnn::push_batch(net, p); };
  data::Rng rng(4);
  EXPECT_EQ(metrics::monotonicity_violation_rate(push, testing::gaussian_batch(2, 500, 5, 2.0), 10000, rng), 0.0);
}

TEST(Monotonicity, NegationViolatesEveryPair) {
  const metrics::PointMap neg = [](const MatrixXd& p) { return MatrixXd(-p); };
  data::Rng rng(4);
  EXPECT_EQ(metrics::monotonicity_violation_rate(neg, testing::gaussian_batch(2, 100, 6), 1000, rng), 1.0);
}

TEST(Monotonicity, QuarterRotationSitsOnTheBoundary) {
  MatrixXd rot(2, 2);
  rot << 0, -1,
         1, 0;
  const metrics::PointMap map = [&](const MatrixXd& p) { return MatrixXd(rot * p); };
  data::Rng rng(4);
  EXPECT_EQ(metrics::monotonicity_violation_rate(map, testing::gaussian_batch(2, 100, 7), 1000, rng), 0.0);
}

TEST(CyclicMonotonicity, GradientMapHasNoGap) {
  const auto net = testing::random_net(icnn::DenseICNNSpec{2, 2, {8, 8}, 1e-3, 1.0}, 8);
  const metrics::PointMap push = [&](const MatrixXd& p) { return icnn::push_batch(net, p); };
  EXPECT_LT(metrics::cyclic_monotonicity_gap(push, testing::gaussian_batch(2, 60, 9)), 1e-9);
}

TEST(CyclicMonotonicity, QuarterRotationHasGap) {
  MatrixXd rot(2, 2);
  rot << 0, -1,
         1, 0;
  const metrics::PointMap map = [&](const MatrixXd& p) { return MatrixXd(rot * p); };
  EXPECT_GT(metrics::cyclic_monotonicity_gap(map, testing::gaussian_batch(2, 60, 9)), 1e-3);
}

TEST(PushGapBound, EqualMapsGiveZero) {
  const metrics::PointMap t = [](const MatrixXd& p) { return MatrixXd(2.0 * p); };
  const auto r = metrics::lemma2_check(t, t, testing::gaussian_batch(2, 64, 1));
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
}

TEST(PushGapBound, TranslationIsTight) {
  const VectorXd c = (VectorXd(2) << 0.3, -1.1).finished();
  const metrics::PointMap id = [](const MatrixXd& p) { return p; };
  const metrics::PointMap shift = [&](const MatrixXd& p) { return MatrixXd(p.colwise() + c); };
  const auto r = metrics::lemma2_check(id, shift, testing::gaussian_batch(2, 64, 2));
  EXPECT_NEAR(r.lhs, 0.5 * c.squaredNorm(), 1e-12);
  EXPECT_NEAR(r.rhs, 0.5 * c.squaredNorm(), 1e-12);
}

TEST(PushGapBound, RandomAffinePairsSatisfyInequality) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n01;
  auto random_affine = [&] {
    metrics::AffineMap m{MatrixXd(2, 2), VectorXd(2)};
    for (Eigen::Index i = 0; i < 4; ++i) m.linear.data()[i] = n01(rng);
    for (Eigen::Index i = 0; i < 2; ++i) m.shift[i] = n01(rng);
    return m;
  };
  int holds = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_affine();
    const auto b = random_affine();
    const auto r = metrics::lemma2_check(a, b, testing::gaussian_batch(2, 128, 1000 + trial));
    if (r.lhs >= r.rhs - 1e-9) ++holds;
  }
  EXPECT_EQ(holds, 100);
}

}  // namespace
}  // namespace w2gn
