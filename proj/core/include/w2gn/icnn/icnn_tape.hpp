#pragma once

#include <span>
#include <vector>

#include "w2gn/ad/tape.hpp"
#include "w2gn/icnn/dense_icnn.hpp"

namespace w2gn::icnn {

/// Expression tape of psi with leaf slots [parameters..., inputs...].
struct IcnnTape {
  ad::ExpressionTape tape;
  std::size_t parameter_count = 0;
  std::size_t input_dim = 0;

  std::vector<double> leaves(const DenseICNN& net, std::span<const double> x) const;
  std::vector<std::size_t> input_slots() const;
  std::vector<std::size_t> parameter_slots() const;
};

IcnnTape build_icnn_tape(const DenseICNNSpec& spec);

}  // namespace w2gn::icnn
