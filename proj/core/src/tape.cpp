#include "w2gn/ad/tape.hpp"

#include <fmt/format.h>

#include "w2gn/ad/dual.hpp"
#include "w2gn/ad/finite_diff.hpp"
#include "w2gn/errors.hpp"

namespace w2gn::ad {

TapeBuilder::TapeBuilder(std::size_t leaf_count) { tape_.leaf_count_ = leaf_count; }

NodeId TapeBuilder::push(Node node) {
  tape_.nodes_.push_back(node);
  return static_cast<NodeId>(tape_.nodes_.size() - 1);
}

void TapeBuilder::check_operand(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tape_.nodes_.size()) {
    throw ConfigError(fmt::format("tape operand {} does not name an existing node", id));
  }
}

NodeId TapeBuilder::leaf(std::size_t slot) {
  if (slot >= tape_.leaf_count_) {
    throw ConfigError(fmt::format("leaf slot {} out of range (tape has {} leaves)", slot, tape_.leaf_count_));
  }
  if (auto it = leaf_nodes_.find(slot); it != leaf_nodes_.end()) return it->second;
  const NodeId id = push({OpCode::leaf, static_cast<std::int32_t>(slot)});
  leaf_nodes_.emplace(slot, id);
  return id;
}

NodeId TapeBuilder::constant(double value) { return push({OpCode::constant, -1, -1, 0, value}); }

NodeId TapeBuilder::add(NodeId a, NodeId b) {
  check_operand(a);
  check_operand(b);
  return push({OpCode::add, a, b});
}

NodeId TapeBuilder::sub(NodeId a, NodeId b) {
  check_operand(a);
  check_operand(b);
  return push({OpCode::sub, a, b});
}

NodeId TapeBuilder::mul(NodeId a, NodeId b) {
  check_operand(a);
  check_operand(b);
  return push({OpCode::mul, a, b});
}

NodeId TapeBuilder::scale(NodeId a, double factor) {
  check_operand(a);
  return push({OpCode::scale, a, -1, 0, factor});
}

NodeId TapeBuilder::square(NodeId a) {
  check_operand(a);
  return push({OpCode::square, a});
}

NodeId TapeBuilder::celu(NodeId a, double alpha) {
  check_operand(a);
  if (!(alpha > 0.0)) throw ConfigError("CELU alpha must be positive");
  return push({OpCode::celu, a, -1, 0, alpha});
}

NodeId TapeBuilder::sum(std::span<const NodeId> terms) {
  const auto first = static_cast<std::int32_t>(tape_.operands_.size());
  for (NodeId t : terms) {
    check_operand(t);
    tape_.operands_.push_back(t);
  }
  return push({OpCode::sum, first, -1, static_cast<std::uint32_t>(terms.size())});
}

NodeId TapeBuilder::dot(std::span<const NodeId> lhs, std::span<const NodeId> rhs) {
  if (lhs.size() != rhs.size()) {
    throw ConfigError(fmt::format("dot operands differ in length ({} vs {})", lhs.size(), rhs.size()));
  }
  const auto first = static_cast<std::int32_t>(tape_.operands_.size());
  for (NodeId t : lhs) {
    check_operand(t);
    tape_.operands_.push_back(t);
  }
  const auto second = static_cast<std::int32_t>(tape_.operands_.size());
  for (NodeId t : rhs) {
    check_operand(t);
    tape_.operands_.push_back(t);
  }
  return push({OpCode::dot, first, second, static_cast<std::uint32_t>(lhs.size())});
}

ExpressionTape TapeBuilder::finish(NodeId output) && {
  check_operand(output);
  tape_.output_ = output;
  leaf_nodes_.clear();
  return std::move(tape_);
}

namespace {

void check_leaves(const ExpressionTape& tape, std::size_t supplied) {
  if (tape.output() < 0) throw ConfigError("tape has no output node");
  if (supplied < tape.leaf_count()) {
    throw ConfigError(
        fmt::format("tape needs {} leaf values, {} supplied", tape.leaf_count(), supplied));
  }
}

using std::isfinite;

template <class T>
void check_finite(const T& v, std::size_t node) {
  if (!isfinite(v)) throw NumericError(fmt::format("non-finite value at tape node {}", node));
}

template <class T>
std::vector<T> forward_sweep(const ExpressionTape& tape, std::span<const T> leaves) {
  const auto nodes = tape.nodes();
  const auto ops = tape.operands();
  std::vector<T> val(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    switch (n.op) {
      case OpCode::leaf: val[i] = leaves[n.a]; break;
      case OpCode::constant: val[i] = T(n.value); break;
      case OpCode::add: val[i] = val[n.a] + val[n.b]; break;
      case OpCode::sub: val[i] = val[n.a] - val[n.b]; break;
      case OpCode::mul: val[i] = val[n.a] * val[n.b]; break;
      case OpCode::scale: val[i] = val[n.a] * n.value; break;
      case OpCode::square: val[i] = val[n.a] * val[n.a]; break;
      case OpCode::celu: val[i] = celu(val[n.a], n.value); break;
      case OpCode::sum: {
        T acc(0.0);
        for (std::uint32_t k = 0; k < n.count; ++k) acc += val[ops[n.a + k]];
        val[i] = acc;
        break;
      }
      case OpCode::dot: {
        T acc(0.0);
        for (std::uint32_t k = 0; k < n.count; ++k) acc += val[ops[n.a + k]] * val[ops[n.b + k]];
        val[i] = acc;
        break;
      }
    }
    check_finite(val[i], i);
  }
  return val;
}

// Accumulates adjoints of every leaf slot given forward values. With T =
// DualValue the tangent parts of the leaf adjoints form a Hessian-vector product.
template <class T>
std::vector<T> reverse_sweep(const ExpressionTape& tape, const std::vector<T>& val) {
  const auto nodes = tape.nodes();
  const auto ops = tape.operands();
  std::vector<T> adj(nodes.size(), T(0.0));
  std::vector<T> leaf_adj(tape.leaf_count(), T(0.0));
  adj[tape.output()] = T(1.0);
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const Node& n = nodes[i];
    const T g = adj[i];
    switch (n.op) {
      case OpCode::leaf: leaf_adj[n.a] += g; break;
      case OpCode::constant: break;
      case OpCode::add:
        adj[n.a] += g;
        adj[n.b] += g;
        break;
      case OpCode::sub:
        adj[n.a] += g;
        adj[n.b] -= g;
        break;
      case OpCode::mul:
        adj[n.a] += g * val[n.b];
        adj[n.b] += g * val[n.a];
        break;
      case OpCode::scale: adj[n.a] += g * n.value; break;
      case OpCode::square: adj[n.a] += g * val[n.a] * 2.0; break;
      case OpCode::celu: adj[n.a] += g * celu_d1(val[n.a], n.value); break;
      case OpCode::sum:
        for (std::uint32_t k = 0; k < n.count; ++k) adj[ops[n.a + k]] += g;
        break;
      case OpCode::dot:
        for (std::uint32_t k = 0; k < n.count; ++k) {
          const NodeId l = ops[n.a + k];
          const NodeId r = ops[n.b + k];
          adj[l] += g * val[r];
          adj[r] += g * val[l];
        }
        break;
    }
  }
  for (std::size_t s = 0; s < leaf_adj.size(); ++s) check_finite(leaf_adj[s], s);
  return leaf_adj;
}

void check_slots(const ExpressionTape& tape, std::span<const std::size_t> wrt) {
  for (std::size_t s : wrt) {
    if (s >= tape.leaf_count()) throw ConfigError(fmt::format("gradient slot {} out of range", s));
  }
}

}  // namespace

double evaluate(const ExpressionTape& tape, std::span<const double> leaf_values) {
  check_leaves(tape, leaf_values.size());
  return forward_sweep<double>(tape, leaf_values)[tape.output()];
}

std::vector<double> gradient(const ExpressionTape& tape, std::span<const double> leaf_values,
                             std::span<const std::size_t> wrt) {
  check_leaves(tape, leaf_values.size());
  check_slots(tape, wrt);
  const auto val = forward_sweep<double>(tape, leaf_values);
  const auto leaf_adj = reverse_sweep<double>(tape, val);
  std::vector<double> out;
  out.reserve(wrt.size());
  for (std::size_t s : wrt) out.push_back(leaf_adj[s]);
  return out;
}

SecondOrderResult forward_over_reverse(const ExpressionTape& tape, std::span<const double> leaf_values,
                                       std::span<const double> leaf_tangent) {
  check_leaves(tape, leaf_values.size());
  if (leaf_tangent.size() != tape.leaf_count()) {
    throw ConfigError(fmt::format("tangent has {} entries, tape has {} leaves", leaf_tangent.size(),
                                  tape.leaf_count()));
  }
  std::vector<DualValue> leaves(tape.leaf_count());
  for (std::size_t s = 0; s < leaves.size(); ++s) leaves[s] = {leaf_values[s], leaf_tangent[s]};
  const auto val = forward_sweep<DualValue>(tape, leaves);
  const auto leaf_adj = reverse_sweep<DualValue>(tape, val);

  SecondOrderResult r;
  r.value = val[tape.output()].primal;
  r.gradient.resize(leaf_adj.size());
  r.hessian_vector.resize(leaf_adj.size());
  for (std::size_t s = 0; s < leaf_adj.size(); ++s) {
    r.gradient[s] = leaf_adj[s].primal;
    r.hessian_vector[s] = leaf_adj[s].tangent;
  }
  return r;
}

std::vector<double> hvp(const ExpressionTape& tape, std::span<const double> leaf_values,
                        std::span<const double> direction, std::span<const std::size_t> wrt) {
  check_slots(tape, wrt);
  if (direction.size() != wrt.size()) {
    throw ConfigError(fmt::format("direction has {} entries for {} differentiated leaves", direction.size(),
                                  wrt.size()));
  }
  std::vector<double> tangent(tape.leaf_count(), 0.0);
  for (std::size_t i = 0; i < wrt.size(); ++i) tangent[wrt[i]] += direction[i];
  const auto r = forward_over_reverse(tape, leaf_values, tangent);
  std::vector<double> out;
  out.reserve(wrt.size());
  for (std::size_t s : wrt) out.push_back(r.hessian_vector[s]);
  return out;
}

std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + h;
    const double up = f(probe);
    probe[i] = xi - h;
    const double down = f(probe);
    probe[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace w2gn::ad
