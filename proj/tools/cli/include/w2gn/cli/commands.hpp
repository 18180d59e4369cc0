#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "w2gn/cli/experiment.hpp"
#include "w2gn/train/trainer.hpp"

namespace w2gn::cli {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_data = 3, exit_numeric = 4 };

/// Convexity and monotonicity of the trained potentials at one checkpoint.
struct Diagnostics {
  std::size_t iteration = 0;
  double convexity_theta = 0.0;  // largest midpoint violation, <= 0 when convex
  double convexity_omega = 0.0;
  double monotonicity_violation_rate = 0.0;  // of grad psi_theta
};

/// `trials` random triples for each convexity check and as many pairs for monotonicity.
Diagnostics diagnose(const icnn::DenseICNN& theta, const icnn::DenseICNN& omega, std::size_t trials,
                     std::uint64_t seed);

/// Output of a train run. Files written under config.output_dir:
///   config.yaml      config echo, enough to rerun
///   log.jsonl        one evaluation record per line
///   diagnostics.jsonl  convexity/monotonicity at every checkpoint
///   checkpoints/iter_<n>.ckpt, final.ckpt
///   summary.json
///   p.csv q.csv push_p.csv inverse_q.csv (2D data only)
/// A failed run keeps whatever was written and adds aborted.ckpt.
struct TrainOutcome {
  train::RunReport report;
  std::vector<Diagnostics> diagnostics;
};

TrainOutcome run_train(const ExperimentConfig& config);

struct ColorTransferOutcome {
  train::RunReport report;
  double energy_identity = 0.0;  // palette energy distance source vs target
  double energy_transfer = 0.0;  // transferred source vs target
  std::array<double, 3> mean_abs_error{};  // transferred vs source image, per channel, 8-bit quantized
};

/// Trains a source -> target palette map and writes transferred.png (source recolored),
/// inverse.png (target recolored by the inverse map), palette_*.csv samples and summary.json.
ColorTransferOutcome run_color_transfer(const ExperimentConfig& config);

struct BenchmarkOutcome {
  std::vector<train::RunReport> runs;  // in config.benchmark_methods order
  /// First logged iteration whose forward and inverse energies are both below the threshold.
  std::vector<std::optional<std::size_t>> converged_at;
};

/// Runs every listed method with the same seed and distributions and writes
/// benchmark_iterations.csv, benchmark_wallclock.csv and summary.json.
BenchmarkOutcome run_benchmark(const ExperimentConfig& config);

struct EvalOutcome {
  train::LogRecord record;
  Diagnostics diagnostics;
  std::optional<double> corr_reference;
};

/// Re-evaluates a checkpoint on the config's evaluation batches and writes eval.json.
EvalOutcome run_eval(const std::filesystem::path& checkpoint, const ExperimentConfig& config);

/// Logs to stderr at the level named by W2GN_LOG_LEVEL (trace, debug, info, warn,
/// error, off; default info).
void configure_logging();

/// Full command line: parses arguments, sets up logging from W2GN_LOG_LEVEL,
/// and maps exceptions to exit codes.
int run_cli(int argc, char** argv);

}  // namespace w2gn::cli
