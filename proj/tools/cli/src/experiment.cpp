#include "w2gn/cli/experiment.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "w2gn/errors.hpp"

namespace w2gn::cli {

namespace {

using data::ToyDistribution;
using data::ToyKind;

bool uses_minimax(const ExperimentConfig& c) {
  return c.method == Method::minimax ||
         std::count(c.benchmark_methods.begin(), c.benchmark_methods.end(), Method::minimax) > 0;
}

bool uses_single_disc(const ExperimentConfig& c) {
  return c.method == Method::single_disc ||
         std::count(c.benchmark_methods.begin(), c.benchmark_methods.end(), Method::single_disc) > 0;
}

// Walks a parsed document, remembering every key it reads so that leftovers can
// be reported as unknown. All errors carry the node position.
class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
    const auto mark = at.Mark();
    if (mark.is_null()) throw ConfigError(fmt::format("{}: {}", origin_, message));
    throw ConfigError(fmt::format("{}:{}:{}: {}", origin_, mark.line + 1, mark.column + 1, message));
  }

  YAML::Node section(const YAML::Node& parent, const std::string& key, const std::string& path, bool required) {
    const YAML::Node node = parent[key];
    if (!node) {
      if (required) fail(parent, fmt::format("missing required field '{}'", path));
      return node;
    }
    if (!node.IsMap()) fail(node, fmt::format("'{}' must be a mapping", path));
    return node;
  }

  template <class T>
  bool read(const YAML::Node& map, const std::string& key, const std::string& path, T& out, bool required = false) {
    const YAML::Node node = map[key];
    if (!node) {
      if (required) fail(map, fmt::format("missing required field '{}'", path));
      return false;
    }
    if (!node.IsScalar() && !node.IsSequence()) fail(node, fmt::format("'{}' has the wrong type", path));
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, fmt::format("'{}' has an invalid value '{}'", path, node.IsScalar() ? node.Scalar() : "[...]"));
    }
    return true;
  }

  /// Rejects keys of `map` outside `allowed`.
  void only(const YAML::Node& map, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        fail(kv.first, fmt::format("unknown key '{}{}'", path.empty() ? "" : path + ".", key));
      }
    }
  }

 private:
  std::string origin_;
};

Source read_source(Reader& r, const YAML::Node& node, const std::string& path) {
  Source src;
  if (node["image"]) {
    r.only(node, path, {"image"});
    std::string file;
    r.read(node, "image", path + ".image", file);
    if (file.empty()) r.fail(node["image"], fmt::format("'{}.image' must not be empty", path));
    src.image = file;
    return src;
  }
  std::string kind_name;
  r.read(node, "kind", path + ".kind", kind_name, true);
  const auto kind = data::parse_toy_kind(kind_name);
  if (!kind) r.fail(node["kind"], fmt::format("unknown distribution kind '{}'", kind_name));

  ToyDistribution d;
  switch (*kind) {
    case ToyKind::standard_gaussian: {
      r.only(node, path, {"kind", "dim"});
      std::size_t dim = 2;
      r.read(node, "dim", path + ".dim", dim);
      d = ToyDistribution::standard_gaussian(dim);
      break;
    }
    case ToyKind::gaussian: {
      r.only(node, path, {"kind", "mean", "covariance"});
      std::vector<double> mean;
      std::vector<std::vector<double>> cov;
      r.read(node, "mean", path + ".mean", mean, true);
      r.read(node, "covariance", path + ".covariance", cov, true);
      const auto n = static_cast<Eigen::Index>(mean.size());
      if (n == 0) r.fail(node["mean"], fmt::format("'{}.mean' must not be empty", path));
      metrics::GaussianSpec g{Eigen::VectorXd::Map(mean.data(), n), Eigen::MatrixXd(n, n)};
      if (static_cast<Eigen::Index>(cov.size()) != n) {
        r.fail(node["covariance"], fmt::format("'{}.covariance' must be {}x{}", path, n, n));
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(cov[i].size()) != n) {
          r.fail(node["covariance"], fmt::format("'{}.covariance' must be {}x{}", path, n, n));
        }
        for (Eigen::Index j = 0; j < n; ++j) g.covariance(i, j) = cov[i][j];
      }
      try {
        d = ToyDistribution::normal(std::move(g));
      } catch (const ConfigError& e) {
        r.fail(node, e.what());
      }
      break;
    }
    case ToyKind::gaussian_ring: {
      r.only(node, path, {"kind", "components", "radius", "sigma"});
      d = ToyDistribution::ring();
      r.read(node, "components", path + ".components", d.components);
      r.read(node, "radius", path + ".radius", d.radius);
      r.read(node, "sigma", path + ".sigma", d.sigma);
      break;
    }
    case ToyKind::gaussian_grid: {
      r.only(node, path, {"kind", "per_side", "spacing", "sigma"});
      d = ToyDistribution::grid();
      r.read(node, "per_side", path + ".per_side", d.components);
      r.read(node, "spacing", path + ".spacing", d.spacing);
      r.read(node, "sigma", path + ".sigma", d.sigma);
      break;
    }
    case ToyKind::swiss_roll: {
      r.only(node, path, {"kind", "noise"});
      d = ToyDistribution::swiss_roll();
      r.read(node, "noise", path + ".noise", d.noise);
      break;
    }
  }
  try {
    d.validate();
  } catch (const ConfigError& e) {
    r.fail(node, e.what());
  }
  src.toy = std::move(d);
  return src;
}

std::size_t source_dim(const Source& s) { return s.is_image() ? 3 : s.toy->dimension(); }

void emit_source(YAML::Emitter& out, const Source& s) {
  out << YAML::BeginMap;
  if (s.is_image()) {
    out << YAML::Key << "image" << YAML::Value << s.image->string();
  } else {
    const auto& d = *s.toy;
    out << YAML::Key << "kind" << YAML::Value << data::to_string(d.kind);
    switch (d.kind) {
      case ToyKind::standard_gaussian:
        out << YAML::Key << "dim" << YAML::Value << d.dim;
        break;
      case ToyKind::gaussian: {
        const auto& g = *d.gaussian;
        out << YAML::Key << "mean" << YAML::Value << YAML::Flow
            << std::vector<double>(g.mean.data(), g.mean.data() + g.mean.size());
        out << YAML::Key << "covariance" << YAML::Value << YAML::BeginSeq;
        for (Eigen::Index i = 0; i < g.covariance.rows(); ++i) {
          std::vector<double> row(static_cast<std::size_t>(g.covariance.cols()));
          for (Eigen::Index j = 0; j < g.covariance.cols(); ++j) row[static_cast<std::size_t>(j)] = g.covariance(i, j);
          out << YAML::Flow << row;
        }
        out << YAML::EndSeq;
        break;
      }
      case ToyKind::gaussian_ring:
        out << YAML::Key << "components" << YAML::Value << d.components;
        out << YAML::Key << "radius" << YAML::Value << d.radius;
        out << YAML::Key << "sigma" << YAML::Value << d.sigma;
        break;
      case ToyKind::gaussian_grid:
        out << YAML::Key << "per_side" << YAML::Value << d.components;
        out << YAML::Key << "spacing" << YAML::Value << d.spacing;
        out << YAML::Key << "sigma" << YAML::Value << d.sigma;
        break;
      case ToyKind::swiss_roll:
        out << YAML::Key << "noise" << YAML::Value << d.noise;
        break;
    }
  }
  out << YAML::EndMap;
}

std::vector<std::string> method_names(const std::vector<Method>& methods) {
  std::vector<std::string> names;
  for (auto m : methods) names.push_back(to_string(m));
  return names;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::w2gn: return "w2gn";
    case Method::single_disc: return "single-disc";
    case Method::minimax: return "minimax";
  }
  return "?";
}

std::optional<Method> parse_method(const std::string& name) {
  for (auto m : {Method::w2gn, Method::single_disc, Method::minimax}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  if (!source.toy && !source.image) throw ConfigError("source is not set");
  if (!target.toy && !target.image) throw ConfigError("target is not set");
  const auto ds = source_dim(source);
  const auto dt = source_dim(target);
  if (ds != dt) throw ConfigError(fmt::format("source dimension {} differs from target dimension {}", ds, dt));
  if (train.spec.input_dim != ds) {
    throw ConfigError(fmt::format("network input dimension {} differs from data dimension {}", train.spec.input_dim, ds));
  }
  train.validate();
  if (scatter_samples == 0) throw ConfigError("output.scatter_samples must be positive");
  if (!(benchmark_threshold > 0.0)) throw ConfigError("benchmark.threshold must be positive");
  std::set<Method> seen;
  for (auto m : benchmark_methods) {
    if (!seen.insert(m).second) throw ConfigError(fmt::format("benchmark method '{}' listed twice", to_string(m)));
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  Reader r(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}:{}: {}", origin, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  if (!root || !root.IsMap()) throw ConfigError(fmt::format("{}: expected a mapping at the top level", origin));
  r.only(root, "", {"version", "method", "seed", "source", "target", "network", "train", "pretrain", "output",
                    "benchmark"});

  int version = 0;
  r.read(root, "version", "version", version, true);
  if (version != config_format_version) {
    r.fail(root["version"], fmt::format("unsupported config version {} (expected {})", version, config_format_version));
  }

  ExperimentConfig c;
  std::string method;
  r.read(root, "method", "method", method, true);
  const auto m = parse_method(method);
  if (!m) r.fail(root["method"], fmt::format("unknown method '{}'", method));
  c.method = *m;
  r.read(root, "seed", "seed", c.train.seed);

  c.source = read_source(r, r.section(root, "source", "source", true), "source");
  c.target = read_source(r, r.section(root, "target", "target", true), "target");
  c.train.spec.input_dim = source_dim(c.source);
  c.train.spec.rank = c.train.spec.input_dim;  // full-rank quadratic terms unless network.rank says otherwise

  if (const auto b = r.section(root, "benchmark", "benchmark", false)) {
    r.only(b, "benchmark", {"methods", "threshold"});
    std::vector<std::string> names;
    r.read(b, "methods", "benchmark.methods", names, true);
    for (const auto& n : names) {
      const auto bm = parse_method(n);
      if (!bm) r.fail(b["methods"], fmt::format("unknown method '{}' in benchmark.methods", n));
      c.benchmark_methods.push_back(*bm);
    }
    r.read(b, "threshold", "benchmark.threshold", c.benchmark_threshold);
  }

  if (const auto n = r.section(root, "network", "network", false)) {
    r.only(n, "network", {"rank", "widths", "beta", "celu_alpha"});
    r.read(n, "rank", "network.rank", c.train.spec.rank);
    r.read(n, "widths", "network.widths", c.train.spec.widths);
    r.read(n, "beta", "network.beta", c.train.spec.beta);
    r.read(n, "celu_alpha", "network.celu_alpha", c.train.spec.celu_alpha);
  }

  const auto t = r.section(root, "train", "train", true);
  r.only(t, "train", {"iterations", "batch_size", "lr", "lambda", "lambda_x", "l1_penalty", "stop_gradient",
                      "smoothing_sigma", "eval_size", "log_interval", "adam_beta1", "adam_beta2", "adam_eps",
                      "inner_iters", "invert_steps", "invert_tol", "invert_lr"});
  auto& tc = c.train;
  r.read(t, "iterations", "train.iterations", tc.iters);
  r.read(t, "batch_size", "train.batch_size", tc.batch_size);
  r.read(t, "lr", "train.lr", tc.lr);
  r.read(t, "lambda", "train.lambda", tc.lambda_y, true);
  r.read(t, "lambda_x", "train.lambda_x", tc.lambda_x);
  r.read(t, "l1_penalty", "train.l1_penalty", tc.l1_penalty);
  r.read(t, "stop_gradient", "train.stop_gradient", tc.stop_gradient);
  r.read(t, "smoothing_sigma", "train.smoothing_sigma", tc.smoothing_sigma);
  r.read(t, "eval_size", "train.eval_size", tc.eval_size);
  r.read(t, "log_interval", "train.log_interval", tc.log_interval);
  r.read(t, "adam_beta1", "train.adam_beta1", tc.adam_beta1);
  r.read(t, "adam_beta2", "train.adam_beta2", tc.adam_beta2);
  r.read(t, "adam_eps", "train.adam_eps", tc.adam_eps);
  // Method-specific knobs are only accepted where they have an effect.
  if (t["inner_iters"] && !uses_minimax(c)) r.fail(t["inner_iters"], "'train.inner_iters' only applies to minimax");
  r.read(t, "inner_iters", "train.inner_iters", tc.inner_iters);
  for (const char* key : {"invert_steps", "invert_tol", "invert_lr"}) {
    if (t[key] && !uses_single_disc(c)) r.fail(t[key], fmt::format("'train.{}' only applies to single-disc", key));
  }
  r.read(t, "invert_steps", "train.invert_steps", tc.invert_steps);
  r.read(t, "invert_tol", "train.invert_tol", tc.invert_tol);
  r.read(t, "invert_lr", "train.invert_lr", tc.invert_lr);

  if (const auto p = r.section(root, "pretrain", "pretrain", false)) {
    r.only(p, "pretrain", {"iterations", "lr", "batch_size"});
    r.read(p, "iterations", "pretrain.iterations", tc.pretrain_iters);
    r.read(p, "lr", "pretrain.lr", tc.pretrain_lr);
    r.read(p, "batch_size", "pretrain.batch_size", tc.pretrain_batch_size);
  }

  if (const auto o = r.section(root, "output", "output", false)) {
    r.only(o, "output", {"dir", "checkpoint_interval", "scatter_samples"});
    std::string dir;
    if (r.read(o, "dir", "output.dir", dir)) c.output_dir = dir;
    r.read(o, "checkpoint_interval", "output.checkpoint_interval", c.checkpoint_interval);
    r.read(o, "scatter_samples", "output.scatter_samples", c.scatter_samples);
  }

  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", origin, e.what()));
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("{}: cannot open config", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string to_yaml(const ExperimentConfig& c) {
  const auto& t = c.train;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << config_format_version;
  out << YAML::Key << "method" << YAML::Value << to_string(c.method);
  out << YAML::Key << "seed" << YAML::Value << t.seed;
  out << YAML::Key << "source" << YAML::Value;
  emit_source(out, c.source);
  out << YAML::Key << "target" << YAML::Value;
  emit_source(out, c.target);

  out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "rank" << YAML::Value << t.spec.rank;
  out << YAML::Key << "widths" << YAML::Value << YAML::Flow << t.spec.widths;
  out << YAML::Key << "beta" << YAML::Value << t.spec.beta;
  out << YAML::Key << "celu_alpha" << YAML::Value << t.spec.celu_alpha;
  out << YAML::EndMap;

  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "iterations" << YAML::Value << t.iters;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "lr" << YAML::Value << t.lr;
  out << YAML::Key << "lambda" << YAML::Value << t.lambda_y;
  out << YAML::Key << "lambda_x" << YAML::Value << t.lambda_x;
  out << YAML::Key << "l1_penalty" << YAML::Value << t.l1_penalty;
  out << YAML::Key << "stop_gradient" << YAML::Value << t.stop_gradient;
  out << YAML::Key << "smoothing_sigma" << YAML::Value << t.smoothing_sigma;
  out << YAML::Key << "eval_size" << YAML::Value << t.eval_size;
  out << YAML::Key << "log_interval" << YAML::Value << t.log_interval;
  out << YAML::Key << "adam_beta1" << YAML::Value << t.adam_beta1;
  out << YAML::Key << "adam_beta2" << YAML::Value << t.adam_beta2;
  out << YAML::Key << "adam_eps" << YAML::Value << t.adam_eps;
  if (uses_minimax(c)) out << YAML::Key << "inner_iters" << YAML::Value << t.inner_iters;
  if (uses_single_disc(c)) {
    out << YAML::Key << "invert_steps" << YAML::Value << t.invert_steps;
    out << YAML::Key << "invert_tol" << YAML::Value << t.invert_tol;
    out << YAML::Key << "invert_lr" << YAML::Value << t.invert_lr;
  }
  out << YAML::EndMap;

  out << YAML::Key << "pretrain" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "iterations" << YAML::Value << t.pretrain_iters;
  out << YAML::Key << "lr" << YAML::Value << t.pretrain_lr;
  out << YAML::Key << "batch_size" << YAML::Value << t.pretrain_batch_size;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << c.output_dir.string();
  out << YAML::Key << "checkpoint_interval" << YAML::Value << c.checkpoint_interval;
  out << YAML::Key << "scatter_samples" << YAML::Value << c.scatter_samples;
  out << YAML::EndMap;

  if (!c.benchmark_methods.empty()) {
    out << YAML::Key << "benchmark" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "methods" << YAML::Value << YAML::Flow << method_names(c.benchmark_methods);
    out << YAML::Key << "threshold" << YAML::Value << c.benchmark_threshold;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::vector<std::string> preset_names() {
  return {"toy-8gauss", "toy-25gauss", "toy-100gauss", "swiss-roll", "color-c5"};
}

ExperimentConfig preset(const std::string& name) {
  // Toy runs: [2; 128; 128, 64], lambda 1, lr 1e-3, batch 1024, L1 1e-10. The
  // full-length runs take 30000 iterations; these keep 5000 to stay desk-sized.
  ExperimentConfig c;
  c.source.toy = ToyDistribution::standard_gaussian();
  c.train.spec = icnn::DenseICNNSpec{2, 2, {128, 128, 64}, 1e-6, 1.0};
  c.train.iters = 5000;
  c.train.log_interval = 250;
  c.checkpoint_interval = 1000;
  c.output_dir = name;
  if (name == "toy-8gauss") {
    c.target.toy = ToyDistribution::ring(8, 4.0, 0.2);
  } else if (name == "toy-25gauss") {
    c.target.toy = ToyDistribution::grid(5, 2.0, 0.1);
  } else if (name == "toy-100gauss") {
    c.target.toy = ToyDistribution::grid(10, 1.0, 0.05);
  } else if (name == "swiss-roll") {
    c.target.toy = ToyDistribution::swiss_roll();
  } else if (name == "color-c5") {
    // [3; 128; 128, 64], 5000 iterations of 1024 pixels, lambda 3, lr 1e-3.
    c.source = Source{std::nullopt, std::filesystem::path{}};
    c.target = Source{std::nullopt, std::filesystem::path{}};
    c.train.spec = icnn::DenseICNNSpec{3, 3, {128, 128, 64}, 1e-6, 1.0};
    c.train.lambda_y = 3.0;
    c.scatter_samples = 3000;
  } else {
    throw ConfigError(fmt::format("unknown preset '{}'", name));
  }
  return c;
}

}  // namespace w2gn::cli
