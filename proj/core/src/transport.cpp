#include "w2gn/metrics/transport.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "w2gn/errors.hpp"
#include "w2gn/metrics/assignment.hpp"

namespace w2gn::metrics {

namespace {

void require_same_dim(const SampleBatch& x, const SampleBatch& y) {
  if (x.dim() != y.dim()) throw ConfigError(fmt::format("batches differ in dimension ({} vs {})", x.dim(), y.dim()));
}

// Sum of |a_i - b_j| over all pairs (i, j), or over i != j when `skip_diagonal`.
double pairwise_distance_sum(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool skip_diagonal) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      if (skip_diagonal && i == j) continue;
      row += (a.col(i) - b.col(j)).norm();
    }
    total += row;
  }
  return total;
}

Eigen::MatrixXd apply_checked(const PointMap& map, const SampleBatch& batch) {
  Eigen::MatrixXd out = map(batch.points);
  if (out.rows() != batch.points.rows() || out.cols() != batch.points.cols()) {
    throw ConfigError("point map must preserve the batch shape");
  }
  return out;
}

}  // namespace

double coupling_cost(const SampleBatch& x, const SampleBatch& y, const std::vector<std::size_t>& assignment) {
  require_same_dim(x, y);
  if (assignment.size() != x.size() || y.size() != x.size()) throw ConfigError("assignment size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    total += 0.5 * (x.points.col(static_cast<Eigen::Index>(i)) -
                    y.points.col(static_cast<Eigen::Index>(assignment[i])))
                       .squaredNorm();
  }
  return total / static_cast<double>(assignment.size());
}

CouplingResult empirical_w2(const SampleBatch& x, const SampleBatch& y) {
  require_same_dim(x, y);
  if (x.size() != y.size()) {
    throw ConfigError(fmt::format("empirical_w2 needs equal batch sizes ({} vs {})", x.size(), y.size()));
  }
  if (x.size() == 0) throw ConfigError("empirical_w2 needs non-empty batches");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = 0.5 * (x.points.col(i) - y.points.col(j)).squaredNorm();
  CouplingResult r;
  r.assignment = solve_assignment(cost);
  r.cost = coupling_cost(x, y, r.assignment);
  return r;
}

double energy_distance(const SampleBatch& x, const SampleBatch& y) {
  require_same_dim(x, y);
  if (x.size() < 2 || y.size() < 2) throw ConfigError("energy_distance needs at least two points per batch");
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  const double cross = pairwise_distance_sum(x.points, y.points, false) / (n * m);
  const double within_x = pairwise_distance_sum(x.points, x.points, true) / (n * (n - 1.0));
  const double within_y = pairwise_distance_sum(y.points, y.points, true) / (m * (m - 1.0));
  return 2.0 * cross - within_x - within_y;
}

double energy_distance_null_std(const SampleBatch& x, const SampleBatch& y, std::size_t permutations,
                                data::Rng& rng) {
  require_same_dim(x, y);
  if (permutations < 2) throw ConfigError("permutation null needs at least two permutations");
  Eigen::MatrixXd pooled(x.points.rows(), x.points.cols() + y.points.cols());
  pooled << x.points, y.points;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pooled.cols()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::vector<double> stats;
  stats.reserve(permutations);
  for (std::size_t p = 0; p < permutations; ++p) {
    std::shuffle(idx.begin(), idx.end(), rng);
    SampleBatch a{Eigen::MatrixXd(pooled.rows(), x.points.cols())};
    SampleBatch b{Eigen::MatrixXd(pooled.rows(), y.points.cols())};
    for (Eigen::Index j = 0; j < a.points.cols(); ++j) a.points.col(j) = pooled.col(idx[static_cast<std::size_t>(j)]);
    for (Eigen::Index j = 0; j < b.points.cols(); ++j)
      b.points.col(j) = pooled.col(idx[static_cast<std::size_t>(j + a.points.cols())]);
    stats.push_back(energy_distance(a, b));
  }
  const double mean = std::accumulate(stats.begin(), stats.end(), 0.0) / static_cast<double>(stats.size());
  double var = 0.0;
  for (double s : stats) var += (s - mean) * (s - mean);
  return std::sqrt(var / static_cast<double>(stats.size() - 1));
}

double monotonicity_violation_rate(const PointMap& map, const SampleBatch& batch, std::size_t pairs,
                                   data::Rng& rng) {
  if (pairs == 0) throw ConfigError("monotonicity check needs at least one pair");
  if (batch.size() < 2) throw ConfigError("monotonicity check needs at least two points");
  const Eigen::MatrixXd g = apply_checked(map, batch);
  std::uniform_int_distribution<Eigen::Index> pick(0, batch.points.cols() - 1);
  std::size_t violations = 0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const Eigen::Index i = pick(rng);
    Eigen::Index j = pick(rng);
    while (j == i) j = pick(rng);
    const double inner = (g.col(i) - g.col(j)).dot(batch.points.col(i) - batch.points.col(j));
    if (inner < -1e-9) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(pairs);
}

double cyclic_monotonicity_gap(const PointMap& map, const SampleBatch& batch) {
  const Eigen::MatrixXd g = apply_checked(map, batch);
  const Eigen::MatrixXd gain = batch.points.transpose() * g;  // gain(i, j) = <x_i, g(x_j)>
  const auto assignment = solve_assignment(-gain);
  double best = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    best += gain(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(assignment[i]));
  }
  return best - gain.trace();
}

Lemma2Result lemma2_check(const PointMap& map_a, const PointMap& map_b, const SampleBatch& batch) {
  const SampleBatch ta{apply_checked(map_a, batch)};
  const SampleBatch tb{apply_checked(map_b, batch)};
  Lemma2Result r;
  r.lhs = 0.5 * (ta.points - tb.points).colwise().squaredNorm().mean();
  r.rhs = empirical_w2(ta, tb).cost;
  return r;
}

}  // namespace w2gn::metrics
