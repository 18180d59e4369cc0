#include "w2gn/cli/commands.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>

#include "w2gn/data/palette.hpp"
#include "w2gn/data/scatter.hpp"
#include "w2gn/errors.hpp"
#include "w2gn/icnn/checkpoint.hpp"
#include "w2gn/metrics/gaussian.hpp"
#include "w2gn/metrics/transport.hpp"
#include "w2gn/train/inversion.hpp"
#include "w2gn/train/report.hpp"

namespace w2gn::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Eigen::MatrixXd;
using data::SampleBatch;
using icnn::DenseICNN;

namespace {

// Streams beyond the trainer's own (1-4).
constexpr std::uint64_t diagnostics_stream = 5;
constexpr std::uint64_t export_stream = 6;

constexpr std::size_t diagnostic_trials = 10000;

using Clock = std::chrono::steady_clock;

struct Data {
  std::shared_ptr<const data::Sampler> p;
  std::shared_ptr<const data::Sampler> q;
  std::shared_ptr<const data::PixelPalette> p_palette;  // set for image sources
  std::shared_ptr<const data::PixelPalette> q_palette;
};

std::shared_ptr<const data::PixelPalette> load_image(const Source& s) {
  if (s.image->empty()) throw ConfigError("image path is empty");
  return std::make_shared<const data::PixelPalette>(data::load_palette(*s.image));
}

Data make_data(const ExperimentConfig& c) {
  Data d;
  if (c.source.is_image()) {
    d.p_palette = load_image(c.source);
    d.p = std::make_shared<data::PaletteSampler>(d.p_palette);
  } else {
    d.p = std::make_shared<data::ToySampler>(*c.source.toy);
  }
  if (c.target.is_image()) {
    d.q_palette = load_image(c.target);
    d.q = std::make_shared<data::PaletteSampler>(d.q_palette);
  } else {
    d.q = std::make_shared<data::ToySampler>(*c.target.toy);
  }
  return d;
}

std::optional<double> gaussian_reference(const ExperimentConfig& c) {
  if (!c.source.toy || !c.target.toy) return std::nullopt;
  const auto a = c.source.toy->as_gaussian();
  const auto b = c.target.toy->as_gaussian();
  if (!a || !b) return std::nullopt;
  return metrics::corr_reference(*a, *b);
}

train::InversionOptions inversion_options(const train::TrainConfig& t) {
  return {t.invert_steps, t.invert_tol, t.invert_lr};
}

// Forward map grad psi_theta and the method's inverse map. The nets must outlive the maps.
metrics::PointMap forward_map(const DenseICNN& theta) {
  return [&theta](const MatrixXd& x) { return icnn::push_batch(theta, x); };
}

metrics::PointMap inverse_map(Method method, const DenseICNN& theta, const DenseICNN& omega,
                              const train::TrainConfig& t) {
  if (method == Method::single_disc) {
    const auto opt = inversion_options(t);
    return [&theta, opt](const MatrixXd& y) { return train::invert_gradient(theta, y, opt).points; };
  }
  return [&omega](const MatrixXd& y) { return icnn::push_batch(omega, y); };
}

train::TrainResult dispatch(Method method, const train::TrainConfig& t, const Data& d,
                            const train::RunOptions& options) {
  switch (method) {
    case Method::w2gn: return train::train_w2gn(t, *d.p, *d.q, options);
    case Method::single_disc: return train::train_single_discriminator(t, *d.p, *d.q, options);
    case Method::minimax: return train::train_minimax_baseline(t, *d.p, *d.q, options);
  }
  throw ConfigError("unknown method");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("{}: cannot open for writing", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("{}: write failed", path.string()));
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("{}: cannot create directory: {}", dir.string(), ec.message()));
}

json diagnostics_json(const Diagnostics& d) {
  json j;
  j["iteration"] = d.iteration;
  j["convexity_theta"] = d.convexity_theta;
  j["convexity_omega"] = d.convexity_omega;
  j["monotonicity_violation_rate"] = d.monotonicity_violation_rate;
  return j;
}

json final_json(const train::LogRecord& r) {
  json j;
  j["corr"] = r.corr;
  j["corr_std_error"] = r.corr_std_error;
  j["r_y"] = r.r_y;
  j["r_x"] = r.r_x;
  j["energy_forward"] = r.energy_forward;
  j["energy_inverse"] = r.energy_inverse;
  return j;
}

// The Corr estimate may undershoot its Gaussian reference by sampling error only.
json reference_json(const train::RunReport& rep) {
  json j;
  if (!rep.corr_reference || rep.records.empty()) return json(nullptr);
  const auto& last = rep.records.back();
  j["corr_reference"] = *rep.corr_reference;
  j["epsilon_hat"] = *rep.corr_reference - last.corr;
  j["bound_holds"] = last.corr >= *rep.corr_reference - 3.0 * last.corr_std_error;
  return j;
}

json summary_json(const std::string& command, const ExperimentConfig& c, const train::RunReport& rep,
                  const std::vector<Diagnostics>& diags, bool completed, double total_seconds) {
  json j;
  j["format_version"] = 1;
  j["command"] = command;
  j["status"] = completed ? "completed" : "aborted";
  j["method"] = rep.method;
  j["iterations"] = rep.iterations;
  j["pretrain_mse"] = rep.pretrain_mse;
  j["final"] = rep.records.empty() ? json(nullptr) : final_json(rep.records.back());
  json tail = json::array();
  const std::size_t keep = std::min<std::size_t>(rep.records.size(), 5);
  for (std::size_t i = rep.records.size() - keep; i < rep.records.size(); ++i) {
    tail.push_back({{"iteration", rep.records[i].iteration}, {"corr", rep.records[i].corr}});
  }
  j["corr_tail"] = tail;
  j["gaussian_reference"] = reference_json(rep);
  j["diagnostics"] = diags.empty() ? json(nullptr) : diagnostics_json(diags.back());
  j["inversion_warnings"] = rep.inversion_warnings;
  j["config"] = to_yaml(c);
  j["wall_clock"] = {{"train_seconds", rep.wall_seconds},
                     {"seconds_per_iteration", rep.seconds_per_iteration},
                     {"total_seconds", total_seconds}};
  return j;
}

std::string checkpoint_name(std::size_t iteration) { return fmt::format("iter_{:08d}.ckpt", iteration); }

void save_state(const train::TrainState& s, const fs::path& path) {
  icnn::Checkpoint ckpt;
  ckpt.iteration = s.iteration;
  ckpt.nets.emplace_back("theta", s.theta);
  ckpt.nets.emplace_back("omega", s.omega);
  icnn::save_checkpoint(ckpt, path);
}

void log_record(const std::string& method, const train::LogRecord& r) {
  spdlog::info("[{}] iter {:>6}  corr {:.5f}  R_Y {:.3e}  R_X {:.3e}  E_fwd {:.4f}  E_inv {:.4f}", method,
               r.iteration, r.corr, r.r_y, r.r_x, r.energy_forward, r.energy_inverse);
}

struct TrainedRun {
  TrainOutcome outcome;
  std::optional<train::TrainState> state;
};

// Trains one method into `dir`, writing logs, checkpoints, diagnostics and the summary.
TrainedRun train_into(const ExperimentConfig& c, Method method, const Data& d, const fs::path& dir,
                      const std::string& command) {
  const auto start = Clock::now();
  make_dir(dir / "checkpoints");
  write_text(dir / "config.yaml", to_yaml(c));
  for (const auto& w : c.train.warnings()) spdlog::warn("{}", w);

  TrainedRun run;
  auto& diags = run.outcome.diagnostics;
  std::ofstream diag_out(dir / "diagnostics.jsonl", std::ios::trunc);
  if (!diag_out) throw IoError(fmt::format("{}: cannot open for writing", (dir / "diagnostics.jsonl").string()));

  train::RunOptions options;
  options.corr_reference = gaussian_reference(c);
  options.checkpoint_interval = c.checkpoint_interval;
  options.on_log = [&](const train::TrainState&, const train::LogRecord& r) { log_record(to_string(method), r); };
  options.on_checkpoint = [&](const train::TrainState& s) {
    save_state(s, dir / "checkpoints" / checkpoint_name(s.iteration));
    Diagnostics dg = diagnose(s.theta, s.omega, diagnostic_trials,
                              train::derive_seed(c.train.seed, diagnostics_stream) + s.iteration);
    dg.iteration = s.iteration;
    diags.push_back(dg);
    diag_out << diagnostics_json(dg).dump() << '\n' << std::flush;
  };
  options.on_abort = [&](const train::TrainState& s, const train::RunReport& partial) {
    train::RunReport rep = partial;
    rep.method = to_string(method);
    rep.iterations = s.iteration;
    save_state(s, dir / "aborted.ckpt");
    train::write_log(rep, dir / "log.jsonl");
    const double total = std::chrono::duration<double>(Clock::now() - start).count();
    write_text(dir / "summary.json", summary_json(command, c, rep, diags, false, total).dump(2) + "\n");
  };

  auto result = dispatch(method, c.train, d, options);
  save_state(result.state, dir / "final.ckpt");
  train::write_log(result.report, dir / "log.jsonl");
  run.outcome.report = result.report;
  run.state.emplace(std::move(result.state));
  const double total = std::chrono::duration<double>(Clock::now() - start).count();
  write_text(dir / "summary.json",
             summary_json(command, c, run.outcome.report, diags, true, total).dump(2) + "\n");
  return run;
}

void export_scatters(const ExperimentConfig& c, Method method, const Data& d, const train::TrainState& s,
                     const fs::path& dir) {
  data::Rng rng(train::derive_seed(c.train.seed, export_stream));
  const SampleBatch p = d.p->draw(c.scatter_samples, rng);
  const SampleBatch q = d.q->draw(c.scatter_samples, rng);
  data::export_scatter(p, dir / "p.csv");
  data::export_scatter(q, dir / "q.csv");
  data::export_scatter(SampleBatch{forward_map(s.theta)(p.points)}, dir / "push_p.csv");
  data::export_scatter(SampleBatch{inverse_map(method, s.theta, s.omega, c.train)(q.points)}, dir / "inverse_q.csv");
}

void export_rgb(const MatrixXd& pixels, const fs::path& path) {
  std::string text = "r,g,b\n";
  for (Eigen::Index j = 0; j < pixels.cols(); ++j) {
    text += fmt::format("{:.17g},{:.17g},{:.17g}\n", pixels(0, j), pixels(1, j), pixels(2, j));
  }
  write_text(path, text);
}

MatrixXd pick_pixels(const data::PixelPalette& pal, std::size_t n, data::Rng& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, pal.pixels.cols() - 1);
  MatrixXd out(3, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = pal.pixels.col(pick(rng));
  return out;
}

double quantized(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0); }

}  // namespace

Diagnostics diagnose(const DenseICNN& theta, const DenseICNN& omega, std::size_t trials, std::uint64_t seed) {
  Diagnostics d;
  std::mt19937_64 rng(seed);
  d.convexity_theta = icnn::convexity_check(theta, trials, rng);
  d.convexity_omega = icnn::convexity_check(omega, trials, rng);
  const auto dim = static_cast<Eigen::Index>(theta.spec().input_dim);
  std::normal_distribution<double> normal(0.0, 3.0);
  SampleBatch pts{MatrixXd(dim, 2048)};
  for (Eigen::Index i = 0; i < pts.points.size(); ++i) pts.points.data()[i] = normal(rng);
  d.monotonicity_violation_rate = metrics::monotonicity_violation_rate(forward_map(theta), pts, trials, rng);
  return d;
}

TrainOutcome run_train(const ExperimentConfig& config) {
  config.validate();
  const Data d = make_data(config);
  auto run = train_into(config, config.method, d, config.output_dir, "train");
  if (config.train.spec.input_dim == 2) export_scatters(config, config.method, d, *run.state, config.output_dir);
  return std::move(run.outcome);
}

ColorTransferOutcome run_color_transfer(const ExperimentConfig& config) {
  config.validate();
  if (!config.source.is_image() || !config.target.is_image()) {
    throw ConfigError("color transfer needs image source and target");
  }
  const Data d = make_data(config);
  const fs::path& dir = config.output_dir;
  auto run = train_into(config, config.method, d, dir, "color-transfer");
  const auto& s = *run.state;

  const auto fwd = forward_map(s.theta);
  const auto inv = inverse_map(config.method, s.theta, s.omega, config.train);
  const data::PixelPalette transferred = data::apply_palette_map(fwd, *d.p_palette);
  const data::PixelPalette inverse = data::apply_palette_map(inv, *d.q_palette);
  data::save_palette(transferred, dir / "transferred.png");
  data::save_palette(inverse, dir / "inverse.png");

  ColorTransferOutcome out;
  out.report = run.outcome.report;
  for (Eigen::Index ch = 0; ch < 3; ++ch) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < transferred.pixels.cols(); ++j) {
      total += std::abs(quantized(transferred.pixels(ch, j)) - quantized(d.p_palette->pixels(ch, j)));
    }
    out.mean_abs_error[static_cast<std::size_t>(ch)] =
        total / 255.0 / static_cast<double>(transferred.pixels.cols());
  }

  data::Rng rng(train::derive_seed(config.train.seed, export_stream));
  const std::size_t n = config.scatter_samples;
  const MatrixXd src = pick_pixels(*d.p_palette, n, rng);
  const MatrixXd tgt = pick_pixels(*d.q_palette, n, rng);
  const MatrixXd moved = fwd(src).cwiseMax(0.0).cwiseMin(1.0);
  const MatrixXd back = inv(tgt).cwiseMax(0.0).cwiseMin(1.0);
  out.energy_identity = metrics::energy_distance(SampleBatch{src}, SampleBatch{tgt});
  out.energy_transfer = metrics::energy_distance(SampleBatch{moved}, SampleBatch{tgt});
  export_rgb(src, dir / "palette_source.csv");
  export_rgb(tgt, dir / "palette_target.csv");
  export_rgb(moved, dir / "palette_transferred.csv");
  export_rgb(back, dir / "palette_inverse.csv");

  // Extend the training summary with the palette measurements.
  std::ifstream in(dir / "summary.json");
  json summary = json::parse(in);
  summary["palette"] = {{"energy_identity", out.energy_identity},
                        {"energy_transfer", out.energy_transfer},
                        {"mean_abs_error", out.mean_abs_error}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  spdlog::info("palette energy distance {:.5f} -> {:.5f}", out.energy_identity, out.energy_transfer);
  return out;
}

BenchmarkOutcome run_benchmark(const ExperimentConfig& config) {
  config.validate();
  if (config.benchmark_methods.size() < 2) {
    throw ConfigError("benchmark needs at least two methods in benchmark.methods");
  }
  const auto start = Clock::now();
  const Data d = make_data(config);
  const fs::path& dir = config.output_dir;
  make_dir(dir);
  write_text(dir / "config.yaml", to_yaml(config));

  BenchmarkOutcome out;
  std::string by_iter = "method,iteration,energy_forward,energy_inverse,corr\n";
  std::string by_clock = "method,iteration,wall_seconds,energy_forward,energy_inverse\n";
  json methods = json::array();
  json timing = json::array();
  for (const Method m : config.benchmark_methods) {
    ExperimentConfig mc = config;
    mc.method = m;
    mc.benchmark_methods.clear();
    auto run = train_into(mc, m, d, dir / to_string(m), "benchmark");
    const auto& rep = run.outcome.report;
    std::optional<std::size_t> hit;
    double hit_seconds = 0.0;
    for (const auto& r : rep.records) {
      by_iter += fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", to_string(m), r.iteration, r.energy_forward,
                             r.energy_inverse, r.corr);
      by_clock += fmt::format("{},{},{:.6f},{:.17g},{:.17g}\n", to_string(m), r.iteration, r.wall_seconds,
                              r.energy_forward, r.energy_inverse);
      if (!hit && r.energy_forward < config.benchmark_threshold && r.energy_inverse < config.benchmark_threshold) {
        hit = r.iteration;
        hit_seconds = r.wall_seconds;
      }
    }
    json mj;
    mj["method"] = to_string(m);
    mj["converged_at_iteration"] = hit ? json(*hit) : json(nullptr);
    mj["final"] = rep.records.empty() ? json(nullptr) : final_json(rep.records.back());
    methods.push_back(mj);
    timing.push_back({{"method", to_string(m)},
                      {"seconds_to_threshold", hit ? json(hit_seconds) : json(nullptr)},
                      {"theta_iterations_per_second",
                       rep.seconds_per_iteration > 0.0 ? 1.0 / rep.seconds_per_iteration : 0.0},
                      {"train_seconds", rep.wall_seconds}});
    spdlog::info("[{}] {}", to_string(m),
                 hit ? fmt::format("reached {} at iteration {}", config.benchmark_threshold, *hit)
                     : fmt::format("did not reach {}", config.benchmark_threshold));
    out.converged_at.push_back(hit);
    out.runs.push_back(rep);
  }
  write_text(dir / "benchmark_iterations.csv", by_iter);
  write_text(dir / "benchmark_wallclock.csv", by_clock);

  json summary;
  summary["format_version"] = 1;
  summary["command"] = "benchmark";
  summary["threshold"] = config.benchmark_threshold;
  summary["methods"] = methods;
  summary["config"] = to_yaml(config);
  summary["wall_clock"] = {{"methods", timing},
                           {"total_seconds", std::chrono::duration<double>(Clock::now() - start).count()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return out;
}

EvalOutcome run_eval(const fs::path& checkpoint, const ExperimentConfig& config) {
  config.validate();
  const auto ckpt = icnn::load_checkpoint(checkpoint);
  const DenseICNN& theta = ckpt.net("theta");
  const DenseICNN& omega = ckpt.net("omega");
  for (const DenseICNN* net : {&theta, &omega}) {
    if (!(net->spec() == config.train.spec)) {
      throw ConfigError(fmt::format("{}: network architecture does not match the config", checkpoint.string()));
    }
  }
  const Data d = make_data(config);
  const auto [x, y] = train::evaluation_batches(config.train, *d.p, *d.q);

  EvalOutcome out;
  out.record = train::evaluate_pair(theta, inverse_map(config.method, theta, omega, config.train), x, y,
                                    config.train.lambda_y);
  out.record.iteration = ckpt.iteration;
  out.diagnostics = diagnose(theta, omega, diagnostic_trials,
                             train::derive_seed(config.train.seed, diagnostics_stream) + ckpt.iteration);
  out.diagnostics.iteration = ckpt.iteration;
  out.corr_reference = gaussian_reference(config);

  json j;
  j["format_version"] = 1;
  j["command"] = "eval";
  j["checkpoint"] = checkpoint.string();
  j["iteration"] = ckpt.iteration;
  j["metrics"] = final_json(out.record);
  j["diagnostics"] = diagnostics_json(out.diagnostics);
  train::RunReport rep;
  rep.records.push_back(out.record);
  rep.corr_reference = out.corr_reference;
  j["gaussian_reference"] = reference_json(rep);
  make_dir(config.output_dir);
  write_text(config.output_dir / "eval.json", j.dump(2) + "\n");
  fmt::print("{}\n", j.dump(2));
  return out;
}

}  // namespace w2gn::cli
