#include "w2gn/icnn/batch_pass.hpp"

#include <fmt/format.h>

#include "w2gn/errors.hpp"

namespace w2gn::icnn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using StridedConstMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;

// Rows j, r + j, 2r + j, ... of the stacked factors of layer k: the j-th row of every F_n.
StridedConstMap factor_slice(const DenseICNN& net, std::size_t k, Index j) {
  const auto& q = net.layout().quadratic[k];
  const Index d = static_cast<Index>(net.spec().input_dim);
  const Index r = static_cast<Index>(net.spec().rank);
  return StridedConstMap(net.parameters().data() + q.factors.begin + j * d, static_cast<Index>(q.outputs), d,
                         Eigen::OuterStride<>(r * d));
}

StridedMap factor_grad_slice(const DenseICNN& net, std::span<double> g, std::size_t k, Index j) {
  const auto& q = net.layout().quadratic[k];
  const Index d = static_cast<Index>(net.spec().input_dim);
  const Index r = static_cast<Index>(net.spec().rank);
  return StridedMap(g.data() + q.factors.begin + j * d, static_cast<Index>(q.outputs), d,
                    Eigen::OuterStride<>(r * d));
}

RowMap grad_matrix(std::span<double> g, const ParamRange& range, Index rows, Index cols) {
  return RowMap(g.data() + range.begin, rows, cols);
}

VecMap grad_vector(std::span<double> g, const ParamRange& range) {
  return VecMap(g.data() + range.begin, static_cast<Index>(range.size()));
}

void check_param_span(const DenseICNN& net, std::span<double> g) {
  if (!g.empty() && g.size() != net.parameter_count()) {
    throw ConfigError(fmt::format("parameter gradient has {} entries, network has {}", g.size(),
                                  net.parameter_count()));
  }
}

}  // namespace

BatchPass::BatchPass(const DenseICNN& net, const MatrixXd& inputs) : net_(&net), inputs_(inputs) {
  const auto& spec = net.spec();
  if (inputs.rows() != static_cast<Index>(spec.input_dim)) {
    throw ConfigError(fmt::format("network expects {}-dimensional points, got {}", spec.input_dim, inputs.rows()));
  }
  const Index r = static_cast<Index>(spec.rank);
  const double alpha = spec.celu_alpha;
  const std::size_t layers = spec.hidden_count();
  projections_.resize(layers);
  preact_.resize(layers);
  act_.resize(layers);
  act_d1_.resize(layers);
  for (std::size_t k = 0; k < layers; ++k) {
    const auto q = net.quadratic(k);
    MatrixXd& s = preact_[k];
    s.noalias() = q.linear * inputs_;
    s.colwise() += q.offset;
    projections_[k].resize(static_cast<std::size_t>(r));
    for (Index j = 0; j < r; ++j) {
      MatrixXd& p = projections_[k][static_cast<std::size_t>(j)];
      p.noalias() = factor_slice(net, k, j) * inputs_;
      s.array() += p.array().square();
    }
    if (k > 0) {
      const auto pl = net.positive(k - 1);
      s.noalias() += pl.weights * act_[k - 1];
      s.colwise() += pl.bias;
    }
    // One vectorized exp per unit: for s <= 0, CELU = alpha (e - 1) and CELU' = e with e = exp(s / alpha).
    const auto pos = (s.array() > 0.0);
    const Eigen::ArrayXXd e = (s.array().min(0.0) / alpha).exp();
    act_[k] = pos.select(s.array(), alpha * (e - 1.0)).matrix();
    act_d1_[k] = pos.select(1.0, e).matrix();
  }
  const auto out = net.output_layer();
  values_ = (out.weights * act_.back()).transpose();
  values_.array() += out.bias[0];
  if (spec.beta != 0.0) values_ += 0.5 * spec.beta * inputs_.colwise().squaredNorm().transpose();
  for (Index b = 0; b < values_.size(); ++b) {
    if (!std::isfinite(values_[b])) throw NumericError(fmt::format("non-finite network output at sample {}", b));
  }
}

MatrixXd BatchPass::input_gradient() const { return backward(VectorXd(), {}); }

MatrixXd BatchPass::backward(const VectorXd& seeds, std::span<double> param_grad) const {
  const DenseICNN& net = *net_;
  const auto& spec = net.spec();
  const auto& layout = net.layout();
  const Index batch = inputs_.cols();
  const Index r = static_cast<Index>(spec.rank);
  check_param_span(net, param_grad);
  const bool unit = seeds.size() == 0;
  if (!unit && seeds.size() != batch) throw ConfigError("backward seeds must have one entry per sample");
  const bool want_params = !param_grad.empty();

  const auto out = net.output_layer();
  MatrixXd zbar = unit ? MatrixXd(out.weights.transpose().replicate(1, batch))
                       : MatrixXd(out.weights.transpose() * seeds.transpose());
  MatrixXd xbar = spec.beta * inputs_;
  if (!unit) xbar = xbar * seeds.asDiagonal();
  if (want_params) {
    const auto& ol = layout.output_layer();
    if (unit) {
      grad_vector(param_grad, ol.weights) += act_.back().rowwise().sum();
      param_grad[ol.bias.begin] += static_cast<double>(batch);
    } else {
      grad_vector(param_grad, ol.weights) += act_.back() * seeds;
      param_grad[ol.bias.begin] += seeds.sum();
    }
  }

  MatrixXd pbar;
  for (std::size_t k = spec.hidden_count(); k-- > 0;) {
    const MatrixXd sbar = zbar.cwiseProduct(act_d1_[k]);
    const auto q = net.quadratic(k);
    xbar.noalias() += q.linear.transpose() * sbar;
    for (Index j = 0; j < r; ++j) {
      pbar = 2.0 * sbar.cwiseProduct(projections_[k][static_cast<std::size_t>(j)]);
      xbar.noalias() += factor_slice(net, k, j).transpose() * pbar;
      if (want_params) factor_grad_slice(net, param_grad, k, j).noalias() += pbar * inputs_.transpose();
    }
    if (want_params) {
      const auto& ql = layout.quadratic[k];
      grad_matrix(param_grad, ql.linear, q.linear.rows(), q.linear.cols()).noalias() += sbar * inputs_.transpose();
      grad_vector(param_grad, ql.offset) += sbar.rowwise().sum();
    }
    if (k > 0) {
      const auto p = net.positive(k - 1);
      if (want_params) {
        const auto& pl = layout.positive[k - 1];
        grad_matrix(param_grad, pl.weights, p.weights.rows(), p.weights.cols()).noalias() +=
            sbar * act_[k - 1].transpose();
        grad_vector(param_grad, pl.bias) += sbar.rowwise().sum();
      }
      zbar.noalias() = p.weights.transpose() * sbar;
    }
  }
  return xbar;
}

BatchPass::SecondOrder BatchPass::second_order(const MatrixXd& tangents, std::span<double> param_grad,
                                               std::span<double> primal_param_grad) const {
  const DenseICNN& net = *net_;
  const auto& spec = net.spec();
  const auto& layout = net.layout();
  const Index batch = inputs_.cols();
  const Index r = static_cast<Index>(spec.rank);
  const double alpha = spec.celu_alpha;
  if (tangents.rows() != inputs_.rows() || tangents.cols() != batch) {
    throw ConfigError("tangent matrix must match the input batch shape");
  }
  check_param_span(net, param_grad);
  check_param_span(net, primal_param_grad);
  const bool want_tangent_params = !param_grad.empty();
  const bool want_primal_params = !primal_param_grad.empty();
  const std::size_t layers = spec.hidden_count();

  // Forward tangents of the cached sweep.
  std::vector<std::vector<MatrixXd>> proj_dot(layers);
  std::vector<MatrixXd> pre_dot(layers), act_dot(layers);
  for (std::size_t k = 0; k < layers; ++k) {
    const auto q = net.quadratic(k);
    MatrixXd& sd = pre_dot[k];
    sd.noalias() = q.linear * tangents;
    proj_dot[k].resize(static_cast<std::size_t>(r));
    for (Index j = 0; j < r; ++j) {
      MatrixXd& pd = proj_dot[k][static_cast<std::size_t>(j)];
      pd.noalias() = factor_slice(net, k, j) * tangents;
      sd.array() += 2.0 * projections_[k][static_cast<std::size_t>(j)].array() * pd.array();
    }
    if (k > 0) sd.noalias() += net.positive(k - 1).weights * act_dot[k - 1];
    act_dot[k] = act_d1_[k].cwiseProduct(sd);
  }

  // Reverse sweep on dual numbers with unit output seeds.
  const auto out = net.output_layer();
  MatrixXd zbar = out.weights.transpose().replicate(1, batch);
  MatrixXd zbar_dot;  // zero at the output layer
  MatrixXd xbar = spec.beta * inputs_;
  MatrixXd xbar_dot = spec.beta * tangents;
  const auto& ol = layout.output_layer();
  if (want_tangent_params) grad_vector(param_grad, ol.weights) += act_dot.back().rowwise().sum();
  if (want_primal_params) {
    grad_vector(primal_param_grad, ol.weights) += act_.back().rowwise().sum();
    primal_param_grad[ol.bias.begin] += static_cast<double>(batch);
  }

  MatrixXd pbar, pbar_dot;
  for (std::size_t k = layers; k-- > 0;) {
    const MatrixXd sbar = zbar.cwiseProduct(act_d1_[k]);
    // CELU'' = CELU' / alpha on the negative side, 0 on the positive side.
    MatrixXd sbar_dot =
        (preact_[k].array() > 0.0).select(0.0, zbar.array() * act_d1_[k].array() * pre_dot[k].array() / alpha);
    if (zbar_dot.size() != 0) sbar_dot += zbar_dot.cwiseProduct(act_d1_[k]);

    const auto q = net.quadratic(k);
    xbar.noalias() += q.linear.transpose() * sbar;
    xbar_dot.noalias() += q.linear.transpose() * sbar_dot;
    for (Index j = 0; j < r; ++j) {
      const MatrixXd& p = projections_[k][static_cast<std::size_t>(j)];
      const MatrixXd& pd = proj_dot[k][static_cast<std::size_t>(j)];
      pbar = 2.0 * sbar.cwiseProduct(p);
      pbar_dot = 2.0 * (sbar_dot.cwiseProduct(p) + sbar.cwiseProduct(pd));
      const auto f = factor_slice(net, k, j);
      xbar.noalias() += f.transpose() * pbar;
      xbar_dot.noalias() += f.transpose() * pbar_dot;
      if (want_tangent_params) {
        auto gf = factor_grad_slice(net, param_grad, k, j);
        gf.noalias() += pbar_dot * inputs_.transpose();
        gf.noalias() += pbar * tangents.transpose();
      }
      if (want_primal_params) factor_grad_slice(net, primal_param_grad, k, j).noalias() += pbar * inputs_.transpose();
    }

    const auto& ql = layout.quadratic[k];
    if (want_tangent_params) {
      auto gl = grad_matrix(param_grad, ql.linear, q.linear.rows(), q.linear.cols());
      gl.noalias() += sbar_dot * inputs_.transpose();
      gl.noalias() += sbar * tangents.transpose();
      grad_vector(param_grad, ql.offset) += sbar_dot.rowwise().sum();
    }
    if (want_primal_params) {
      grad_matrix(primal_param_grad, ql.linear, q.linear.rows(), q.linear.cols()).noalias() +=
          sbar * inputs_.transpose();
      grad_vector(primal_param_grad, ql.offset) += sbar.rowwise().sum();
    }
    if (k > 0) {
      const auto p = net.positive(k - 1);
      const auto& pl = layout.positive[k - 1];
      if (want_tangent_params) {
        auto gw = grad_matrix(param_grad, pl.weights, p.weights.rows(), p.weights.cols());
        gw.noalias() += sbar_dot * act_[k - 1].transpose();
        gw.noalias() += sbar * act_dot[k - 1].transpose();
        grad_vector(param_grad, pl.bias) += sbar_dot.rowwise().sum();
      }
      if (want_primal_params) {
        grad_matrix(primal_param_grad, pl.weights, p.weights.rows(), p.weights.cols()).noalias() +=
            sbar * act_[k - 1].transpose();
        grad_vector(primal_param_grad, pl.bias) += sbar.rowwise().sum();
      }
      zbar.noalias() = p.weights.transpose() * sbar;
      zbar_dot.noalias() = p.weights.transpose() * sbar_dot;
    }
  }
  for (Index b = 0; b < batch; ++b) {
    if (!xbar_dot.col(b).allFinite()) {
      throw NumericError(fmt::format("non-finite Hessian-vector product at sample {}", b));
    }
  }
  return {std::move(xbar), std::move(xbar_dot)};
}

}  // namespace w2gn::icnn
