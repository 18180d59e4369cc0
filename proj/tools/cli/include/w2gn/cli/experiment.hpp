#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "w2gn/data/toy.hpp"
#include "w2gn/train/config.hpp"

namespace w2gn::cli {

inline constexpr int config_format_version = 1;

enum class Method { w2gn, single_disc, minimax };

std::string to_string(Method method);
/// Parses "w2gn", "single-disc", "minimax".
std::optional<Method> parse_method(const std::string& name);

/// Either a toy distribution or the pixel palette of an image file.
struct Source {
  std::optional<data::ToyDistribution> toy;
  std::optional<std::filesystem::path> image;

  bool is_image() const noexcept { return image.has_value(); }
};

struct ExperimentConfig {
  Method method = Method::w2gn;
  Source source;
  Source target;
  train::TrainConfig train;
  std::filesystem::path output_dir = "w2gn-run";
  std::size_t checkpoint_interval = 0;  // 0: only the final checkpoint
  std::size_t scatter_samples = 3000;
  std::vector<Method> benchmark_methods;  // benchmark subcommand only
  double benchmark_threshold = 0.05;      // energy distance that counts as converged

  /// Throws ConfigError on inconsistent fields (train config, sources, methods).
  void validate() const;
};

/// Parses a YAML document. `origin` prefixes every error message, which reads
/// "origin:line:column: message" whenever a position is known. Unknown keys are
/// rejected; `version`, `method`, `source`, `target` and `train.lambda` are required.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");

/// Reads and parses a config file; unreadable files raise IoError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical YAML rendering. parse_config(to_yaml(c)) reproduces c exactly.
std::string to_yaml(const ExperimentConfig& config);

/// Built-in experiments: toy-8gauss, toy-25gauss, toy-100gauss, swiss-roll, color-c5.
/// color-c5 leaves both image paths empty; the caller supplies them.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace w2gn::cli
