#pragma once

// Shared vocabulary for the cooperative multi-agent training stack:
// observations, actions, histories, and the environment contract that the
// policies and the training loop are written against.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace magrpo {

// Violated preconditions and broken invariants surface as ContractError, not
// as silently wrong numbers.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

#define MAGRPO_REQUIRE(cond, msg)                  \
  do {                                             \
    if (!(cond)) throw ::magrpo::ContractError(msg); \
  } while (0)

using AgentId = int;

// A token sequence shown to one agent at one turn. The alphabet is plain
// ASCII text; there is no tokenizer beyond the characters themselves.
struct Observation {
  AgentId agent = 0;
  int turn = 0;
  std::string text;
};

// One entry chosen from an agent's finite response catalog. `rendered` is the
// catalog entry verbatim.
struct ResponseAction {
  int catalog_index = -1;
  std::string rendered;
};

struct JointAction {
  std::vector<ResponseAction> actions;  // indexed by agent
};

struct TaskSpec {
  int task_id = 0;
  long long target_value = 0;
  std::string prompt_fragment;
};

// What one environment step produced: the joint action taken, the reward paid
// out, and the observations emitted for the next turn.
struct TurnRecord {
  JointAction joint_action;
  double joint_reward = 0.0;
  std::vector<Observation> observations_emitted;
};

// The reward-visible part of environment state.
struct AccessibleState {
  TaskSpec task;
  std::vector<TurnRecord> interaction_record;
  int turn() const { return static_cast<int>(interaction_record.size()); }
};

// Hidden environment state. Reward computation must never read this; a test
// perturbs it while holding actions fixed and asserts bit-identical rewards.
// It is opaque outside the owning environment and never appears verbatim in
// any observation.
struct UserState {
  std::uint64_t style = 0;
  std::uint64_t drift = 0;
};

// One agent's interaction history: o0, a0, o1, a1, ..., alternating and
// starting with an observation. Value semantics throughout; an append returns
// a new history, so branching rollouts can never alias each other's state.
struct History {
  AgentId agent = 0;
  std::vector<Observation> observations;
  std::vector<ResponseAction> actions;

  bool awaiting_action() const {
    return observations.size() == actions.size() + 1;
  }
};

History make_history(AgentId agent, const Observation& first);

// Appends (action, next observation) to a history that currently ends with an
// observation. Contract error otherwise, or when the observation is addressed
// to a different agent.
History history_append(History h, const ResponseAction& a, const Observation& o);

// Content-derived conditioning key: injective over reachable histories,
// stable across process runs, free of tabs and newlines so it can live on one
// line of a checkpoint file.
std::string canonical_history_key(const History& h);

// Ladder diagnostics attached to a step by environments that score responses
// through the gated reward ladder. `levels` are the four paid contributions
// (structure, syntax, test, cooperation); `test_fraction` is the fraction of
// the task's checks matched, 0 until the earlier gates pass.
struct RewardBreakdown {
  std::array<double, 4> levels{};
  double test_fraction = 0.0;
  bool full_pass = false;
};

struct StepOutcome {
  double reward = 0.0;
  std::vector<Observation> observations;  // next-turn observations, per agent
  bool done = false;
  std::optional<RewardBreakdown> breakdown;
  // Per-agent reward attribution, supplied only by environments that define
  // one (e.g. a matrix game with published per-player tables).
  std::optional<std::vector<double>> per_agent_rewards;
};

// Finite-horizon environment. One instance owns exactly one rollout's state;
// concurrent rollouts each get their own instance from a factory. reset()
// must be called before step(); stepping a finished episode is a contract
// error.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int num_agents() const = 0;
  virtual int horizon() const = 0;
  virtual int catalog_size(AgentId agent) const = 0;
  virtual ResponseAction action_from_catalog(AgentId agent, int index) const = 0;

  // True when later-indexed agents observe earlier agents' same-turn
  // responses (the sequential-pipeline layout).
  virtual bool sequential() const { return false; }

  // In sequential mode, extends `base` with the same-turn responses of
  // agents indexed before `agent`. Identity by default.
  virtual Observation observation_with_peer(
      AgentId agent, Observation base,
      const std::vector<ResponseAction>& earlier) const {
    (void)agent;
    (void)earlier;
    return base;
  }

  virtual std::vector<Observation> reset(const TaskSpec& task) = 0;
  virtual StepOutcome step(const JointAction& joint) = 0;
  virtual bool done() const = 0;
  virtual const AccessibleState& accessible_state() const = 0;
};

// Builds a fresh environment instance. Factories capture only immutable
// configuration, so calling one from several threads at once is safe.
using EnvFactory = std::function<std::unique_ptr<Environment>()>;

}  // namespace magrpo
