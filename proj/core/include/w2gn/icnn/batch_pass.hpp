#pragma once

// Batched derivatives of a DenseICNN over the columns of an input matrix.
//
// BatchPass runs the forward sweep once and caches activations. From that
// cache it can run
//   - a reverse sweep: input gradients and (optionally) weighted parameter
//     gradients sum_b s_b d psi(x_b)/d theta;
//   - a forward-over-reverse sweep with an input tangent v_b per column:
//     H_xx(x_b) v_b per column and sum_b s_b d/d theta <grad_x psi(x_b), v_b>.
//
// This is the layer-level counterpart of the scalar ExpressionTape: the same
// dual-number propagation, applied to whole activation matrices.

#include <Eigen/Core>
#include <algorithm>
#include <span>
#include <vector>

#include "w2gn/icnn/dense_icnn.hpp"

namespace w2gn::icnn {

class BatchPass {
 public:
  BatchPass(const DenseICNN& net, const Eigen::MatrixXd& inputs);

  std::size_t batch_size() const noexcept { return static_cast<std::size_t>(inputs_.cols()); }
  const Eigen::MatrixXd& inputs() const noexcept { return inputs_; }

  /// Hidden-layer pre-activations s_k (h_k x B), the CELU arguments.
  const std::vector<Eigen::MatrixXd>& preactivations() const noexcept { return preact_; }

  /// psi at every column.
  const Eigen::VectorXd& values() const noexcept { return values_; }

  /// Reverse sweep seeded with `seeds` (one per column; empty means all ones).
  /// Returns seed-weighted input gradients. When `param_grad` is non-empty it
  /// receives += sum_b s_b d psi(x_b)/d theta.
  Eigen::MatrixXd backward(const Eigen::VectorXd& seeds, std::span<double> param_grad) const;

  /// Input gradients with unit seeds and no parameter accumulation.
  Eigen::MatrixXd input_gradient() const;

  struct SecondOrder {
    Eigen::MatrixXd input_gradient;  // grad_x psi per column (unit seeds)
    Eigen::MatrixXd input_hvp;       // H_xx v per column
  };

  /// Forward-over-reverse sweep with unit seeds and input tangents (one column
  /// per sample). When `param_grad` is non-empty it receives
  /// += sum_b d/d theta <grad_x psi(x_b), v_b>, and when `primal_param_grad`
  /// is non-empty it receives += sum_b d psi(x_b)/d theta.
  SecondOrder second_order(const Eigen::MatrixXd& tangents, std::span<double> param_grad,
                           std::span<double> primal_param_grad = {}) const;

 private:
  const DenseICNN* net_;
  Eigen::MatrixXd inputs_;
  std::vector<std::vector<Eigen::MatrixXd>> projections_;  // [k][j]: j-th row of every F_{k,n} times x, h_k x B
  std::vector<Eigen::MatrixXd> preact_;       // s_k, h_k x B
  std::vector<Eigen::MatrixXd> act_;          // z_k
  std::vector<Eigen::MatrixXd> act_d1_;       // CELU'(s_k)
  Eigen::VectorXd values_;
};

/// Column chunk size that keeps a [.; 128; 128, 64] pass resident in L2.
inline constexpr Eigen::Index default_chunk = 256;

/// Calls f(begin, count) over consecutive column ranges of at most `chunk` columns.
template <class F>
void for_each_chunk(Eigen::Index cols, F&& f, Eigen::Index chunk = default_chunk) {
  for (Eigen::Index begin = 0; begin < cols; begin += chunk) f(begin, std::min(chunk, cols - begin));
}

}  // namespace w2gn::icnn
