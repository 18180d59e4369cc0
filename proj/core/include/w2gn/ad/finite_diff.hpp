#pragma once

#include <functional>
#include <span>
#include <vector>

namespace w2gn::ad {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> x, double h);

}  // namespace w2gn::ad
