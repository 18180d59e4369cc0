#pragma once

#include <Eigen/Core>
#include <vector>

namespace w2gn::metrics {

/// Exact minimum-cost perfect matching on a square cost matrix via the
/// O(n^3) shortest-augmenting-path Hungarian method. Returns assignment[i] =
/// column matched to row i.
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace w2gn::metrics
