#pragma once

// Scalar expression tape with reverse-mode gradients and forward-over-reverse
// Hessian-vector products.
//
// A tape is built once through TapeBuilder and is immutable afterwards. Leaves
// are numbered slots; the caller supplies one value per slot on every pass.
// Node operands always precede the node, so a single forward sweep evaluates
// the expression and a single backward sweep accumulates adjoints.

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace w2gn::ad {

using NodeId = std::int32_t;

enum class OpCode : std::uint8_t {
  leaf,      // a = slot
  constant,  // value
  add,       // a + b
  sub,       // a - b
  mul,       // a * b
  scale,     // value * a
  square,    // a * a
  celu,      // CELU(a), value = alpha
  sum,       // sum of operands[a, a + count)
  dot,       // sum_i operands[a + i] * operands[b + i], i < count
};

struct Node {
  OpCode op = OpCode::constant;
  std::int32_t a = -1;
  std::int32_t b = -1;
  std::uint32_t count = 0;
  double value = 0.0;
};

class ExpressionTape {
 public:
  std::size_t leaf_count() const noexcept { return leaf_count_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  NodeId output() const noexcept { return output_; }
  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const NodeId> operands() const noexcept { return operands_; }

 private:
  friend class TapeBuilder;

  std::size_t leaf_count_ = 0;
  std::vector<Node> nodes_;
  std::vector<NodeId> operands_;
  NodeId output_ = -1;
};

class TapeBuilder {
 public:
  explicit TapeBuilder(std::size_t leaf_count);

  /// Returns the node for a leaf slot, creating it on first use.
  NodeId leaf(std::size_t slot);
  NodeId constant(double value);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId square(NodeId a);
  NodeId celu(NodeId a, double alpha = 1.0);
  NodeId sum(std::span<const NodeId> terms);
  NodeId dot(std::span<const NodeId> lhs, std::span<const NodeId> rhs);

  std::size_t node_count() const noexcept { return tape_.nodes_.size(); }

  /// Seals the tape with `output` as its scalar result.
  ExpressionTape finish(NodeId output) &&;

 private:
  NodeId push(Node node);
  void check_operand(NodeId id) const;

  ExpressionTape tape_;
  std::unordered_map<std::size_t, NodeId> leaf_nodes_;
};

/// Scalar output of the tape at the given leaf values.
double evaluate(const ExpressionTape& tape, std::span<const double> leaf_values);

/// Reverse-mode derivative of the output with respect to the listed slots,
/// in the order given.
std::vector<double> gradient(const ExpressionTape& tape, std::span<const double> leaf_values,
                             std::span<const std::size_t> wrt);

/// Hessian (restricted to `wrt` x `wrt`) times `direction`.
std::vector<double> hvp(const ExpressionTape& tape, std::span<const double> leaf_values,
                        std::span<const double> direction, std::span<const std::size_t> wrt);

struct SecondOrderResult {
  double value = 0.0;
  std::vector<double> gradient;        // one entry per leaf slot
  std::vector<double> hessian_vector;  // full Hessian times the leaf tangent
};

/// One forward-over-reverse sweep with a tangent on every leaf slot.
SecondOrderResult forward_over_reverse(const ExpressionTape& tape, std::span<const double> leaf_values,
                                       std::span<const double> leaf_tangent);

}  // namespace w2gn::ad
