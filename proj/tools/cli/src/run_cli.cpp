#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <memory>

#include "w2gn/cli/commands.hpp"
#include "w2gn/errors.hpp"

namespace w2gn::cli {

void configure_logging() {
  auto logger = std::make_shared<spdlog::logger>("w2gn", std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
  logger->set_pattern("[%H:%M:%S] %^%l%$ %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("W2GN_LOG_LEVEL")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept that for the literal "off"
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("ignoring unknown W2GN_LOG_LEVEL '{}'", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

namespace {

// Errors bypass the logger so that W2GN_LOG_LEVEL=off cannot hide them.
int report_error(int code, const std::string& message) {
  std::fflush(stdout);
  fmt::print(stderr, "w2gn: error: {}\n", message);
  return code;
}

struct CommonOptions {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  auto* cfg = cmd->add_option("--config", o.config, "Experiment config (YAML)")->check(CLI::ExistingFile);
  auto* pre = cmd->add_option("--preset", o.preset, "Built-in experiment")->check(CLI::IsMember(preset_names()));
  cfg->excludes(pre);
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--out", o.out, "Override the output directory");
}

ExperimentConfig resolve(const CommonOptions& o, const std::string& fallback_preset) {
  ExperimentConfig c;
  if (!o.config.empty()) {
    c = load_config(o.config);
  } else if (!o.preset.empty()) {
    c = preset(o.preset);
  } else if (!fallback_preset.empty()) {
    c = preset(fallback_preset);
  } else {
    throw ConfigError("either --config or --preset is required");
  }
  if (o.seed) c.train.seed = *o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Wasserstein-2 generative networks: train, evaluate and compare cycle monotone transport maps"};
  app.require_subcommand(1);

  CommonOptions train_opt, eval_opt, color_opt, bench_opt;
  auto* train_cmd = app.add_subcommand("train", "Pretrain and train on a config or preset");
  add_common(train_cmd, train_opt);

  auto* eval_cmd = app.add_subcommand("eval", "Re-evaluate a checkpoint");
  add_common(eval_cmd, eval_opt);
  std::string checkpoint;
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  auto* color_cmd = app.add_subcommand("color-transfer", "Transfer the palette of TARGET onto SOURCE");
  add_common(color_cmd, color_opt);
  std::string source_image, target_image;
  color_cmd->add_option("source", source_image, "Source image (PNG or PPM)")->required();
  color_cmd->add_option("target", target_image, "Target image (PNG or PPM)")->required();

  auto* bench_cmd = app.add_subcommand("benchmark", "Run several methods on the same problem");
  add_common(bench_cmd, bench_opt);
  std::vector<std::string> methods;
  bench_cmd->add_option("--methods", methods, "Override benchmark.methods")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  configure_logging();
  try {
    if (*train_cmd) {
      run_train(resolve(train_opt, ""));
    } else if (*eval_cmd) {
      run_eval(checkpoint, resolve(eval_opt, ""));
    } else if (*color_cmd) {
      ExperimentConfig c = resolve(color_opt, "color-c5");
      c.source = Source{std::nullopt, std::filesystem::path(source_image)};
      c.target = Source{std::nullopt, std::filesystem::path(target_image)};
      c.train.spec.input_dim = 3;
      run_color_transfer(c);
    } else if (*bench_cmd) {
      ExperimentConfig c = resolve(bench_opt, "");
      if (!methods.empty()) {
        c.benchmark_methods.clear();
        for (const auto& name : methods) {
          const auto m = parse_method(name);
          if (!m) throw ConfigError(fmt::format("unknown method '{}'", name));
          c.benchmark_methods.push_back(*m);
        }
      }
      run_benchmark(c);
    }
  } catch (const ConfigError& e) {
    return report_error(exit_config, e.what());
  } catch (const IoError& e) {
    return report_error(exit_data, e.what());
  } catch (const TrainingError& e) {
    return report_error(exit_numeric, fmt::format("training failed at iteration {}: {}", e.iteration(), e.what()));
  } catch (const NumericError& e) {
    return report_error(exit_numeric, e.what());
  }
  return exit_ok;
}

}  // namespace w2gn::cli
