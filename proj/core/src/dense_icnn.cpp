#include "w2gn/icnn/dense_icnn.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "w2gn/ad/dual.hpp"
#include "w2gn/errors.hpp"
#include "w2gn/icnn/batch_pass.hpp"
#include "w2gn/icnn/icnn_tape.hpp"

namespace w2gn::icnn {

void DenseICNNSpec::validate() const {
  if (input_dim == 0) throw ConfigError("network input_dim must be positive");
  if (rank == 0) throw ConfigError("network rank must be positive");
  if (rank > input_dim) {
    throw ConfigError(fmt::format("network rank {} exceeds input_dim {}", rank, input_dim));
  }
  if (widths.empty()) throw ConfigError("network needs at least one hidden width");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("network widths must be positive");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("network beta must be finite and >= 0");
  if (!(celu_alpha > 0.0) || !std::isfinite(celu_alpha)) throw ConfigError("network celu_alpha must be > 0");
}

std::size_t DenseICNNSpec::parameter_count() const { return ParameterLayout(*this).total; }

std::size_t DenseICNNSpec::quadratic_parameter_count() const {
  return std::accumulate(widths.begin(), widths.end(), std::size_t{0}) * rank * input_dim;
}

ParameterLayout::ParameterLayout(const DenseICNNSpec& spec) {
  spec.validate();
  const std::size_t d = spec.input_dim;
  const std::size_t r = spec.rank;
  std::size_t off = 0;
  auto take = [&off](std::size_t n) {
    ParamRange range{off, off + n};
    off += n;
    return range;
  };
  for (std::size_t h : spec.widths) {
    QuadraticLayerLayout q;
    q.outputs = h;
    q.factors = take(h * r * d);
    q.linear = take(h * d);
    q.offset = take(h);
    quadratic.push_back(q);
  }
  for (std::size_t k = 1; k < spec.widths.size(); ++k) {
    PositiveLayerLayout p;
    p.outputs = spec.widths[k];
    p.inputs = spec.widths[k - 1];
    p.weights = take(p.outputs * p.inputs);
    p.bias = take(p.outputs);
    positive.push_back(p);
  }
  PositiveLayerLayout out;
  out.outputs = 1;
  out.inputs = spec.widths.back();
  out.weights = take(out.inputs);
  out.bias = take(1);
  positive.push_back(out);
  total = off;
}

DenseICNN::DenseICNN(DenseICNNSpec spec)
    : spec_(std::move(spec)), layout_(spec_), params_(layout_.total, 0.0) {}

ConvexQuadraticView DenseICNN::quadratic(std::size_t k) const {
  const auto& q = layout_.quadratic.at(k);
  const auto d = static_cast<Eigen::Index>(spec_.input_dim);
  const auto n = static_cast<Eigen::Index>(q.outputs);
  const auto r = static_cast<Eigen::Index>(spec_.rank);
  return {ConstRowMap(params_.data() + q.factors.begin, n * r, d),
          ConstRowMap(params_.data() + q.linear.begin, n, d),
          ConstVecMap(params_.data() + q.offset.begin, n), spec_.rank};
}

PositiveLinearView DenseICNN::positive(std::size_t k) const {
  const auto& p = layout_.positive.at(k);
  return {ConstRowMap(params_.data() + p.weights.begin, static_cast<Eigen::Index>(p.outputs),
                      static_cast<Eigen::Index>(p.inputs)),
          ConstVecMap(params_.data() + p.bias.begin, static_cast<Eigen::Index>(p.outputs))};
}

Eigen::VectorXd cq_forward(const ConvexQuadraticView& layer, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != layer.linear.cols()) {
    throw ConfigError(fmt::format("quadratic layer expects {} inputs, got {}", layer.linear.cols(), x.size()));
  }
  const ConstVecMap xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd proj = layer.factors * xv;
  Eigen::VectorXd out = layer.linear * xv + layer.offset;
  const auto r = static_cast<Eigen::Index>(layer.rank);
  for (Eigen::Index n = 0; n < out.size(); ++n) out[n] += proj.segment(n * r, r).squaredNorm();
  return out;
}

namespace {

Eigen::MatrixXd as_column(const DenseICNN& net, std::span<const double> x) {
  if (x.size() != net.spec().input_dim) {
    throw ConfigError(fmt::format("network expects {} inputs, got {}", net.spec().input_dim, x.size()));
  }
  return ConstVecMap(x.data(), static_cast<Eigen::Index>(x.size()));
}

double max_midpoint_violation(const DenseICNN& net, std::size_t trials, std::mt19937_64& rng, double scale,
                              bool remove_beta_term) {
  if (trials == 0) throw ConfigError("convexity_check needs at least one trial");
  const auto d = static_cast<Eigen::Index>(net.spec().input_dim);
  std::normal_distribution<double> normal(0.0, scale);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr std::size_t chunk = 2048;
  const double half_beta = 0.5 * net.spec().beta;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t done = 0; done < trials; done += chunk) {
    const auto m = static_cast<Eigen::Index>(std::min(chunk, trials - done));
    Eigen::MatrixXd x(d, m), xp(d, m), mid(d, m);
    Eigen::VectorXd t(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) x(i, j) = normal(rng);
      for (Eigen::Index i = 0; i < d; ++i) xp(i, j) = normal(rng);
      t[j] = unit(rng);
      mid.col(j) = t[j] * x.col(j) + (1.0 - t[j]) * xp.col(j);
    }
    Eigen::VectorXd fx = icnn_forward_batch(net, x);
    Eigen::VectorXd fxp = icnn_forward_batch(net, xp);
    Eigen::VectorXd fm = icnn_forward_batch(net, mid);
    if (remove_beta_term) {
      fx -= half_beta * x.colwise().squaredNorm().transpose();
      fxp -= half_beta * xp.colwise().squaredNorm().transpose();
      fm -= half_beta * mid.colwise().squaredNorm().transpose();
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      worst = std::max(worst, fm[j] - t[j] * fx[j] - (1.0 - t[j]) * fxp[j]);
    }
  }
  return worst;
}

template <class F>
void for_each_penalized(const ParameterLayout& layout, F&& f) {
  for (const auto& q : layout.quadratic) {
    f(q.factors);
    f(q.linear);
  }
  for (const auto& p : layout.positive) f(p.weights);
}

}  // namespace

double icnn_forward(const DenseICNN& net, std::span<const double> x) {
  return BatchPass(net, as_column(net, x)).values()[0];
}

std::vector<double> push(const DenseICNN& net, std::span<const double> x) {
  as_column(net, x);
  const IcnnTape t = build_icnn_tape(net.spec());
  const auto leaves = t.leaves(net, x);
  const auto slots = t.input_slots();
  return ad::gradient(t.tape, leaves, slots);
}

Eigen::VectorXd icnn_forward_batch(const DenseICNN& net, const Eigen::MatrixXd& points) {
  Eigen::VectorXd out(points.cols());
  for_each_chunk(points.cols(), [&](Eigen::Index begin, Eigen::Index count) {
    out.segment(begin, count) = BatchPass(net, points.middleCols(begin, count)).values();
  });
  return out;
}

Eigen::MatrixXd push_batch(const DenseICNN& net, const Eigen::MatrixXd& points) {
  Eigen::MatrixXd out(points.rows(), points.cols());
  for_each_chunk(points.cols(), [&](Eigen::Index begin, Eigen::Index count) {
    out.middleCols(begin, count) = BatchPass(net, points.middleCols(begin, count)).input_gradient();
  });
  return out;
}

std::size_t project_nonneg(DenseICNN& net) {
  std::size_t clipped = 0;
  auto params = net.parameters();
  for (const auto& p : net.layout().positive) {
    for (std::size_t i = p.weights.begin; i < p.weights.end; ++i) {
      if (params[i] < 0.0) {
        params[i] = 0.0;
        ++clipped;
      }
    }
  }
  return clipped;
}

DenseICNN init(const DenseICNNSpec& spec, std::uint64_t seed) {
  DenseICNN net(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  auto params = net.parameters();
  const double d = static_cast<double>(spec.input_dim);
  const double r = static_cast<double>(spec.rank);
  for (const auto& q : net.layout().quadratic) {
    for (std::size_t i = q.factors.begin; i < q.factors.end; ++i) params[i] = sym(rng) / std::sqrt(r * d);
    for (std::size_t i = q.linear.begin; i < q.linear.end; ++i) params[i] = sym(rng) / std::sqrt(d);
  }
  for (const auto& p : net.layout().positive) {
    std::uniform_real_distribution<double> pos(0.0, 2.0 / std::sqrt(static_cast<double>(p.inputs)));
    for (std::size_t i = p.weights.begin; i < p.weights.end; ++i) params[i] = pos(rng);
  }
  return net;
}

double convexity_check(const DenseICNN& net, std::size_t trials, std::mt19937_64& rng, double scale) {
  return max_midpoint_violation(net, trials, rng, scale, false);
}

double strong_convexity_check(const DenseICNN& net, std::size_t trials, std::mt19937_64& rng, double scale) {
  return max_midpoint_violation(net, trials, rng, scale, true);
}

double l1_norm(const DenseICNN& net) {
  const auto params = net.parameters();
  double total = 0.0;
  for_each_penalized(net.layout(), [&](const ParamRange& r) {
    for (std::size_t i = r.begin; i < r.end; ++i) total += std::abs(params[i]);
  });
  return total;
}

void add_l1_subgradient(const DenseICNN& net, double coefficient, std::span<double> grad) {
  if (coefficient == 0.0) return;
  const auto params = net.parameters();
  for_each_penalized(net.layout(), [&](const ParamRange& r) {
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const double p = params[i];
      grad[i] += p > 0.0 ? coefficient : (p < 0.0 ? -coefficient : 0.0);
    }
  });
}

std::vector<double> IcnnTape::leaves(const DenseICNN& net, std::span<const double> x) const {
  std::vector<double> out(net.parameters().begin(), net.parameters().end());
  out.insert(out.end(), x.begin(), x.end());
  return out;
}

std::vector<std::size_t> IcnnTape::input_slots() const {
  std::vector<std::size_t> s(input_dim);
  std::iota(s.begin(), s.end(), parameter_count);
  return s;
}

std::vector<std::size_t> IcnnTape::parameter_slots() const {
  std::vector<std::size_t> s(parameter_count);
  std::iota(s.begin(), s.end(), std::size_t{0});
  return s;
}

IcnnTape build_icnn_tape(const DenseICNNSpec& spec) {
  const ParameterLayout layout(spec);
  const std::size_t d = spec.input_dim;
  const std::size_t r = spec.rank;
  ad::TapeBuilder b(layout.total + d);

  std::vector<ad::NodeId> x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = b.leaf(layout.total + i);

  auto leaf_row = [&](std::size_t first, std::size_t n) {
    std::vector<ad::NodeId> row(n);
    for (std::size_t i = 0; i < n; ++i) row[i] = b.leaf(first + i);
    return row;
  };

  std::vector<ad::NodeId> z_prev;
  for (std::size_t k = 0; k < spec.widths.size(); ++k) {
    const auto& q = layout.quadratic[k];
    std::vector<ad::NodeId> z(q.outputs);
    for (std::size_t n = 0; n < q.outputs; ++n) {
      std::vector<ad::NodeId> terms;
      for (std::size_t j = 0; j < r; ++j) {
        const auto f = leaf_row(q.factors.begin + (n * r + j) * d, d);
        terms.push_back(b.square(b.dot(f, x)));
      }
      terms.push_back(b.dot(leaf_row(q.linear.begin + n * d, d), x));
      terms.push_back(b.leaf(q.offset.begin + n));
      if (k > 0) {
        const auto& p = layout.positive[k - 1];
        terms.push_back(b.dot(leaf_row(p.weights.begin + n * p.inputs, p.inputs), z_prev));
        terms.push_back(b.leaf(p.bias.begin + n));
      }
      z[n] = b.celu(b.sum(terms), spec.celu_alpha);
    }
    z_prev = std::move(z);
  }
  const auto& out = layout.output_layer();
  std::vector<ad::NodeId> terms{b.dot(leaf_row(out.weights.begin, out.inputs), z_prev), b.leaf(out.bias.begin)};
  if (spec.beta != 0.0) terms.push_back(b.scale(b.dot(x, x), 0.5 * spec.beta));
  const ad::NodeId psi = b.sum(terms);
  return {std::move(b).finish(psi), layout.total, d};
}

}  // namespace w2gn::icnn
