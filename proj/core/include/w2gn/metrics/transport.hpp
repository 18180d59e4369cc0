#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "w2gn/data/sample_batch.hpp"
#include "w2gn/metrics/gaussian.hpp"

namespace w2gn::metrics {

using data::SampleBatch;

/// Batch map: one input point per column in, one output point per column out.
using PointMap = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

struct CouplingResult {
  std::vector<std::size_t> assignment;  // x_i is matched with y_{assignment[i]}
  double cost = 0.0;                    // (1/n) sum |x_i - y_pi(i)|^2 / 2
};

/// Squared-W2 (with the 1/2 cost factor) between two equal-size empirical measures.
CouplingResult empirical_w2(const SampleBatch& x, const SampleBatch& y);

/// Re-evaluates (1/n) sum |x_i - y_pi(i)|^2 / 2 for a given assignment.
double coupling_cost(const SampleBatch& x, const SampleBatch& y, const std::vector<std::size_t>& assignment);

/// Unbiased (U-statistic) energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'|.
double energy_distance(const SampleBatch& x, const SampleBatch& y);

/// Standard deviation of the energy distance under random relabelling of the pooled sample.
double energy_distance_null_std(const SampleBatch& x, const SampleBatch& y, std::size_t permutations, data::Rng& rng);

/// Fraction of random distinct pairs with <g(x) - g(x'), x - x'> < -1e-9.
double monotonicity_violation_rate(const PointMap& map, const SampleBatch& batch, std::size_t pairs, data::Rng& rng);

/// max over permutations pi of sum <x_i, g(x_pi(i))> minus the identity sum. Zero
/// (up to rounding) iff the map is cyclically monotone on the batch.
double cyclic_monotonicity_gap(const PointMap& map, const SampleBatch& batch);

struct Lemma2Result {
  double lhs = 0.0;  // 1/2 mean |T1(x) - T2(x)|^2
  double rhs = 0.0;  // empirical W2^2(T1 # batch, T2 # batch)
};

Lemma2Result lemma2_check(const PointMap& map_a, const PointMap& map_b, const SampleBatch& batch);

}  // namespace w2gn::metrics
