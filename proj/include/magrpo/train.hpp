#pragma once

// Group-relative policy optimization: collect G parallel joint rollouts under
// frozen policies, compute undiscounted returns-to-go, center them against
// per-branch group means, and ascend the resulting policy-gradient estimate.
// One update per episode, strictly on-policy, no discounting.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "magrpo/core.hpp"
#include "magrpo/policy.hpp"

namespace magrpo {

enum class BranchMode {
  // Every member shares one branch at every turn: the baseline is the plain
  // group mean even after histories diverge.
  whole_group,
  // Members sharing an identical joint conditioning prefix at a turn share a
  // branch; a member alone in its branch gets a zero advantage there.
  shared_prefix,
};

struct TrainConfig {
  int group_size = 8;          // G, at least 2: a group of one centers to zero
  int horizon = 1;             // must match the environment's horizon
  double learning_rate = 0.1;  // plain constant-step gradient ascent
  int episodes = 100;
  BranchMode branch_mode = BranchMode::whole_group;
  std::uint64_t seed = 0;
  bool parallel = true;  // OpenMP rollout collection; serial path for testing
};

void validate_train_config(const TrainConfig& cfg);

// One member-turn as the optimizer needs it: the conditioning key each agent
// acted from, the joint action, and the rewards paid.
struct MemberTurn {
  std::vector<std::string> keys;  // per agent
  JointAction joint;
  double joint_reward = 0.0;
  std::optional<RewardBreakdown> breakdown;
  std::optional<std::vector<double>> per_agent_rewards;
};

struct MemberTrajectory {
  std::vector<MemberTurn> turns;
};

struct GroupRollout {
  TaskSpec task;
  int num_agents = 0;
  int horizon = 0;
  // Policy snapshot the group was collected under; gradient accumulation
  // refuses rollouts from any other snapshot.
  std::vector<std::uint64_t> policy_versions;
  std::vector<MemberTrajectory> members;
};

// Collects envs.size() complete trajectories for `task` under frozen
// policies. Member g draws from the stream (seed, episode, g), so the result
// is identical whether members run serially or concurrently. Each environment
// instance is reset here and owned by exactly one member.
GroupRollout collect_group_rollouts_serial(
    const std::vector<std::unique_ptr<Environment>>& envs,
    const std::vector<PolicyParams>& policies, const TaskSpec& task,
    std::uint64_t seed, std::uint64_t episode);

// OpenMP variant of the same kernel; bit-identical output.
GroupRollout collect_group_rollouts_parallel(
    const std::vector<std::unique_ptr<Environment>>& envs,
    const std::vector<PolicyParams>& policies, const TaskSpec& task,
    std::uint64_t seed, std::uint64_t episode);

GroupRollout collect_group_rollouts(
    const std::vector<std::unique_ptr<Environment>>& envs,
    const std::vector<PolicyParams>& policies, const TaskSpec& task,
    std::uint64_t seed, std::uint64_t episode, bool parallel);

// Exact text dump (17 significant digits) for determinism comparisons.
std::string serialize_rollout(const GroupRollout& r);

// values[g][t] = sum of rewards from turn t to the end (no discounting).
struct ReturnTable {
  std::vector<std::vector<double>> values;
};

ReturnTable compute_returns(const GroupRollout& r);

// Returns built from one agent's share of a per-agent reward decomposition.
// Contract error when the environment supplied none.
ReturnTable compute_returns_for_agent(const GroupRollout& r, AgentId agent);

// branches[t] partitions the member indices at turn t; branches appear in
// order of their smallest member and members stay ascending within a branch,
// so every later reduction has one fixed order.
struct BranchPartition {
  std::vector<std::vector<std::vector<int>>> branches;
};

BranchPartition branch_partition(const GroupRollout& r, BranchMode mode);

// advantage[g][t] = return[g][t] minus the mean return of g's branch at t.
struct AdvantageTable {
  std::vector<std::vector<double>> values;
};

AdvantageTable compute_advantages(const ReturnTable& returns,
                                  const BranchPartition& partition);

// Sums advantage-weighted score terms over turns, branches (each scaled by
// 1 / (#branches at the turn * branch size)), and members, per agent. The
// policies must be the exact snapshot the rollout was collected under.
std::vector<LogitGradient> accumulate_objective_gradient(
    const GroupRollout& r, const BranchPartition& partition,
    const std::vector<AdvantageTable>& per_agent_adv,
    const std::vector<PolicyParams>& policies);

// Per-episode digest emitted to the caller.
struct EpisodeStats {
  int episode = 0;
  std::vector<double> turn_reward_mean;  // mean reward at each turn
  double total_return_mean = 0.0;
  double total_return_std = 0.0;  // population std over the group
  std::optional<std::array<double, 4>> ladder_level_mean;
  double wall_clock_ms = 0.0;  // in-memory only; not part of persisted logs
};

using EpisodeCallback = std::function<void(const EpisodeStats&)>;

struct TrainResult {
  std::vector<PolicyParams> policies;
  std::vector<EpisodeStats> stats;
};

// Per episode: sample a task, collect G rollouts, one group-relative update
// per agent with joint returns shared by all agents.
TrainResult train(const TrainConfig& cfg, const EnvFactory& factory,
                  const std::vector<TaskSpec>& dataset,
                  std::vector<PolicyParams> policies,
                  const EpisodeCallback& cb = nullptr);

// Same loop, but each agent's returns and baseline come from its own share
// of the environment's per-agent reward decomposition.
TrainResult train_independent(const TrainConfig& cfg, const EnvFactory& factory,
                              const std::vector<TaskSpec>& dataset,
                              std::vector<PolicyParams> policies,
                              const EpisodeCallback& cb = nullptr);

// One episode rollout outside training: sampled when `rng` is given, greedy
// otherwise. Used by evaluation and analysis code.
MemberTrajectory rollout_episode(Environment& env,
                                 const std::vector<PolicyParams>& policies,
                                 const TaskSpec& task, RngStream* rng);

}  // namespace magrpo
