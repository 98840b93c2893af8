#pragma once

// Environment implementations: the one-shot 2x2 matrix game and the
// multi-turn cooperative assembly task, plus the gated reward ladder, the
// feedback channel, catalogs/datasets, and the pass@k estimator.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "magrpo/core.hpp"

namespace magrpo::envs {

// ---------------------------------------------------------------------------
// Catalogs and tasks

struct ResponseCatalog {
  AgentId agent = 0;
  std::vector<std::string> entries;

  int size() const { return static_cast<int>(entries.size()); }
  ResponseAction render(int index) const;
};

struct LadderWeights {
  double structure = 0.25;
  double syntax = 0.25;
  double test = 0.25;
  double cooperation = 0.25;
};

// Nonnegative entries summing to 1 (within 1e-12), so ladder totals live in
// [0, 1].
void validate_weights(const LadderWeights& w);

enum class FeedbackMode { self_evolving, guided };

struct Dataset {
  std::vector<TaskSpec> tasks;
  ResponseCatalog aux;
  ResponseCatalog main;
};

// The committed desk-scale defaults: 16 single-target tasks and 12-entry
// catalogs per agent. Each catalog carries one entry that fails to parse, the
// main catalog carries entries that ignore AUX, and every task target is
// reachable by a small handful of catalog pairs.
Dataset default_dataset();

// Line-oriented dataset file format (version-tagged first line):
//   magrpo-dataset v1
//   task <id> <target> <prompt...>
//   aux <catalog entry...>
//   main <catalog entry...>
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& d, const std::string& path);

// Construction-time sanity: ids unique, catalogs non-empty, every task target
// attainable by at least one catalog pair. Returns every problem found.
std::vector<std::string> validate_dataset(const Dataset& d);

// ---------------------------------------------------------------------------
// Gated reward ladder

// Weight-free gate evaluation for one (aux, main) response pair.
struct LadderGates {
  bool structure_aux = false;
  bool structure_main = false;
  bool syntax_aux = false;   // meaningful once both structures pass
  bool syntax_main = false;
  double test_fraction = 0.0;  // fraction of the task's checks matched
  bool cooperation = false;    // MAIN evaluated successfully through AUX
  std::optional<long long> main_value;
};

LadderGates evaluate_ladder(const std::string& aux_rendered,
                            const std::string& main_rendered,
                            const TaskSpec& task);

struct LadderResult {
  double total = 0.0;
  RewardBreakdown breakdown;
};

// Applies weights to the gates. Levels unlock strictly in order: structure,
// syntax, test, cooperation; the cooperation level pays only when the test
// level is fully passed.
LadderResult ladder_reward(const ResponseAction& aux, const ResponseAction& main,
                           const TaskSpec& task, const LadderWeights& weights);

// Feedback observation for `agent` about the most recent turn. Self-evolving
// mode replays both agents' previous responses; guided mode appends a
// scripted tag naming the first failing ladder level (with the sign of the
// value error for test failures).
Observation generate_feedback(const AccessibleState& record, FeedbackMode mode,
                              AgentId agent);

// ---------------------------------------------------------------------------
// Matrix game

// One-shot two-player game. `joint` is row-major over (agent-0 action,
// agent-1 action); when both per-player tables are present they must sum to
// `joint` cell-by-cell.
struct MatrixGameSpec {
  std::array<double, 4> joint{};
  std::optional<std::array<double, 4>> u1;
  std::optional<std::array<double, 4>> u2;
};

MatrixGameSpec joint_only_game();  // {10, 7, 7, 0}
MatrixGameSpec posg1_game();       // decomposition with one pure equilibrium
MatrixGameSpec posg2_game();       // decomposition with misaligned equilibria

class MatrixGameEnv : public Environment {
 public:
  explicit MatrixGameEnv(const MatrixGameSpec& spec);

  int num_agents() const override { return 2; }
  int horizon() const override { return 1; }
  int catalog_size(AgentId agent) const override;
  ResponseAction action_from_catalog(AgentId agent, int index) const override;
  std::vector<Observation> reset(const TaskSpec& task) override;
  StepOutcome step(const JointAction& joint) override;
  bool done() const override { return done_; }
  const AccessibleState& accessible_state() const override { return state_; }

 private:
  MatrixGameSpec spec_;
  AccessibleState state_;
  UserState user_;
  bool started_ = false;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Cooperative assembly

struct CoopAssemblyConfig {
  ResponseCatalog aux;   // agent 0
  ResponseCatalog main;  // agent 1
  int horizon = 2;
  FeedbackMode feedback = FeedbackMode::self_evolving;
  // When set, the main agent observes the aux agent's same-turn response
  // (the sequential-pipeline layout); otherwise turns are simultaneous.
  bool sequential_mode = false;
  LadderWeights weights;
  std::uint64_t user_style = 0;
};

// Two agents assemble AUX and MAIN definitions over a finite horizon. Every
// turn pays the ladder reward of that turn's joint response; turns after the
// first observe feedback about the previous turn.
class CoopAssemblyEnv : public Environment {
 public:
  explicit CoopAssemblyEnv(CoopAssemblyConfig cfg);

  int num_agents() const override { return 2; }
  int horizon() const override { return cfg_.horizon; }
  int catalog_size(AgentId agent) const override;
  ResponseAction action_from_catalog(AgentId agent, int index) const override;
  bool sequential() const override { return cfg_.sequential_mode; }
  Observation observation_with_peer(
      AgentId agent, Observation base,
      const std::vector<ResponseAction>& earlier) const override;
  std::vector<Observation> reset(const TaskSpec& task) override;
  StepOutcome step(const JointAction& joint) override;
  bool done() const override { return done_; }
  const AccessibleState& accessible_state() const override { return state_; }

 private:
  CoopAssemblyConfig cfg_;
  AccessibleState state_;
  UserState user_;
  bool started_ = false;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Single-policy wrapper

// Presents a two-agent environment as a one-agent environment over the
// product catalog, for the single-policy baseline. Product index encodes
// (aux, main) as aux_index * |main catalog| + main_index.
class SingleAgentWrapper : public Environment {
 public:
  explicit SingleAgentWrapper(std::unique_ptr<Environment> inner);

  int num_agents() const override { return 1; }
  int horizon() const override { return inner_->horizon(); }
  int catalog_size(AgentId agent) const override;
  ResponseAction action_from_catalog(AgentId agent, int index) const override;
  std::vector<Observation> reset(const TaskSpec& task) override;
  StepOutcome step(const JointAction& joint) override;
  bool done() const override { return inner_->done(); }
  const AccessibleState& accessible_state() const override { return state_; }

 private:
  JointAction decode(int index) const;

  std::unique_ptr<Environment> inner_;
  AccessibleState state_;
  bool started_ = false;
};

// ---------------------------------------------------------------------------
// pass@k

// Unbiased estimator of the probability that at least one of k draws (without
// replacement) from m samples with c passes is a pass: 1 - C(m-c,k)/C(m,k).
double pass_at_k(int m, int c, int k);

}  // namespace magrpo::envs
