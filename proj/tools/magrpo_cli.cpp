#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "magrpo/harness.hpp"
#include "magrpo/policy.hpp"

namespace {

// Exit codes: 0 success, 1 config/usage problem, 2 runtime failure.
constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::optional<magrpo::harness::ExperimentConfig> load_config(
    const std::string& path, const std::optional<std::uint64_t>& seed_override) {
  magrpo::harness::ParseOutcome outcome =
      magrpo::harness::parse_config_file(path);
  if (!outcome.config) {
    for (const std::string& v : outcome.violations) {
      std::cerr << "config error: " << v << "\n";
    }
    return std::nullopt;
  }
  if (seed_override) outcome.config->seed = *seed_override;
  return outcome.config;
}

int run_train(const std::string& config_path,
              const std::optional<std::uint64_t>& seed_override,
              const std::string& out_dir) {
  auto cfg = load_config(config_path, seed_override);
  if (!cfg) return kConfigError;
  auto t0 = std::chrono::steady_clock::now();
  magrpo::harness::RunArtifacts artifacts =
      magrpo::harness::run_experiment(*cfg, out_dir);
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  std::cerr << "trained " << cfg->train.episodes << " episodes in " << secs
            << "s\n";
  std::cout << "metrics: " << artifacts.metrics_path << "\n";
  std::cout << "checkpoint: " << artifacts.checkpoint_path << "\n";
  if (!artifacts.stats.empty()) {
    const magrpo::EpisodeStats& last = artifacts.stats.back();
    std::cout << "final total_return_mean: " << last.total_return_mean << "\n";
  }
  return kOk;
}

int run_eval(const std::string& config_path,
             const std::optional<std::uint64_t>& seed_override,
             const std::string& checkpoint_path,
             const std::string& report_path) {
  auto cfg = load_config(config_path, seed_override);
  if (!cfg) return kConfigError;
  std::vector<magrpo::PolicyParams> policies =
      magrpo::load_policies(checkpoint_path);
  magrpo::harness::EvalReport report = magrpo::harness::evaluate(*cfg, policies);
  std::string text = magrpo::harness::eval_report_json(report);
  std::cout << text;
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out.good()) {
      std::cerr << "error: cannot write " << report_path << "\n";
      return kRuntimeError;
    }
    out << text;
  }
  return kOk;
}

int run_analyze(const std::string& config_path) {
  auto cfg = load_config(config_path, std::nullopt);
  if (!cfg) return kConfigError;
  if (cfg->env.name != "matrix_game") {
    std::cerr << "config error: analyze-game needs a matrix_game environment\n";
    return kConfigError;
  }
  bool decomposed = cfg->env.preset == "posg1" || cfg->env.preset == "posg2" ||
                    (cfg->env.u1 && cfg->env.u2);
  if (!decomposed) {
    std::cerr << "config error: analyze-game needs per-player utilities; use a "
                 "posg preset or give u1/u2\n";
    return kConfigError;
  }
  std::cout << magrpo::harness::analyze_game(*cfg);
  return kOk;
}

int run_export(const std::string& log_path, const std::string& csv_path,
               int window) {
  int skipped = magrpo::harness::export_plot_data(log_path, csv_path, window);
  if (skipped > 0) {
    std::cerr << "warning: skipped " << skipped << " corrupt record(s)\n";
  }
  std::cout << "csv: " << csv_path << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-relative policy training for small cooperative games"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string checkpoint_path;
  std::string report_path;
  std::string log_path;
  std::string csv_path;
  int window = 0;
  std::optional<std::uint64_t> seed_override;

  CLI::App* train_cmd =
      app.add_subcommand("train", "Train policies, write metrics and a checkpoint");
  train_cmd->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--seed", seed_override, "override the config seed");

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate a checkpoint against the config env");
  eval_cmd->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  eval_cmd->add_option("--checkpoint", checkpoint_path, "policy checkpoint file")
      ->required();
  eval_cmd->add_option("--seed", seed_override, "override the config seed");
  eval_cmd->add_option("--out", report_path, "also write the JSON report here");

  CLI::App* analyze_cmd = app.add_subcommand(
      "analyze-game", "Equilibria and joint-optimum report for a matrix game");
  analyze_cmd->add_option("--config", config_path, "experiment config (JSON)")
      ->required();

  CLI::App* export_cmd =
      app.add_subcommand("export", "Convert a metrics log to plot-ready CSV");
  export_cmd->add_option("--log", log_path, "metrics.jsonl produced by train")
      ->required();
  export_cmd->add_option("--out", csv_path, "CSV path to write")->required();
  export_cmd->add_option("--window", window,
                         "trailing moving-average window (0 disables)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (train_cmd->parsed()) return run_train(config_path, seed_override, out_dir);
    if (eval_cmd->parsed()) {
      return run_eval(config_path, seed_override, checkpoint_path, report_path);
    }
    if (analyze_cmd->parsed()) return run_analyze(config_path);
    if (export_cmd->parsed()) return run_export(log_path, csv_path, window);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}
