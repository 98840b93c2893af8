#pragma once

// Experiment harness: JSON config with exhaustive validation, the training
// runner with its line-delimited metrics log and checkpoint, evaluation with
// pass@k, matrix-game analysis, and CSV export for plotting.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magrpo/envs.hpp"
#include "magrpo/gametheory.hpp"
#include "magrpo/train.hpp"

namespace magrpo::harness {

struct EnvSection {
  std::string name;     // "matrix_game" or "coop_assembly"
  std::string preset;   // matrix: joint_only/posg1/posg2; coop: default
  std::optional<std::string> dataset_path;  // coop only, replaces the preset
  int horizon = 1;
  envs::FeedbackMode feedback = envs::FeedbackMode::self_evolving;
  bool sequential = false;
  envs::LadderWeights weights;
  // Explicit matrices for a custom matrix game (instead of a preset).
  std::optional<std::array<double, 4>> joint;
  std::optional<std::array<double, 4>> u1;
  std::optional<std::array<double, 4>> u2;
};

struct TrainSection {
  std::string method = "magrpo";  // magrpo / independent / single_agent
  int group_size = 8;
  double learning_rate = 0.1;
  int episodes = 100;
  BranchMode branch_mode = BranchMode::whole_group;
  bool parallel = true;
};

struct EvalSection {
  int samples = 1000;
  std::vector<int> k = {1};
  int ma_window = 0;  // moving-average window for exported plot data; 0 = off
};

struct ExperimentConfig {
  EnvSection env;
  TrainSection train;
  EvalSection eval;
  std::uint64_t seed = 0;
};

// Either a fully validated config or every violation found: unknown keys,
// missing required keys, type errors, and cross-field rules all reported
// together, never just the first.
struct ParseOutcome {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> violations;
};

ParseOutcome parse_config_text(const std::string& text);
ParseOutcome parse_config_file(const std::string& path);

// Canonical JSON for a config; parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const ExperimentConfig& c);

// Environment factory and task dataset implied by a validated config.
EnvFactory build_env_factory(const ExperimentConfig& c);
std::vector<TaskSpec> build_dataset(const ExperimentConfig& c);

// Fresh uniform policies matching the config's environment.
std::vector<PolicyParams> initial_policies(const ExperimentConfig& c);

// First line of every metrics log.
extern const char* kMetricsSchemaLine;

// Trains per config. Writes `<out_dir>/metrics.jsonl` (schema tag first, one
// record per episode, flushed per line so an interrupted run leaves a valid
// prefix) and `<out_dir>/policy.txt`. On failure a `<out_dir>/FAILED` marker
// records the error before it propagates. Metric records persist only
// deterministic fields; wall-clock stays in the returned stats.
struct RunArtifacts {
  std::vector<EpisodeStats> stats;
  std::string metrics_path;
  std::string checkpoint_path;
};

RunArtifacts run_experiment(const ExperimentConfig& c, const std::string& out_dir);

struct EvalReport {
  int samples = 0;
  int pass_count = 0;
  double total_return_mean = 0.0;
  double total_return_std = 0.0;
  double greedy_total_return = 0.0;  // greedy rollout averaged over tasks
  std::vector<std::pair<int, double>> pass_at;  // (k, pass@k)
  std::optional<std::array<double, 4>> ladder_level_mean;
};

// Rolls out eval.samples sampled episodes plus one greedy episode per task
// under a frozen checkpoint. A sample passes when its final turn fully
// matches the task's checks (test fraction 1).
EvalReport evaluate(const ExperimentConfig& c,
                    const std::vector<PolicyParams>& policies);

std::string eval_report_json(const EvalReport& r);

// Equilibria and optimality gaps for the config's matrix game. Requires a
// per-player decomposition (a posg preset or explicit u1/u2).
std::string analyze_game(const ExperimentConfig& c);

// Reads a metrics log and writes plot-ready CSV with a header row: episode,
// return mean/std, per-turn rewards, ladder levels when present, and a
// trailing moving average of the return when `ma_window` > 0. Corrupt log
// lines are skipped; returns how many were. An empty log yields a
// header-only CSV.
int export_plot_data(const std::string& log_path, const std::string& csv_path,
                     int ma_window);

}  // namespace magrpo::harness
