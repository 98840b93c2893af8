#include "magrpo/train.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "magrpo/rng.hpp"

namespace magrpo {

void validate_train_config(const TrainConfig& cfg) {
  MAGRPO_REQUIRE(cfg.group_size >= 2,
                 "train config: group size must be at least 2; a group of one "
                 "always centers its own return to zero");
  MAGRPO_REQUIRE(cfg.horizon >= 1, "train config: horizon must be positive");
  MAGRPO_REQUIRE(std::isfinite(cfg.learning_rate) && cfg.learning_rate > 0,
                 "train config: learning rate must be positive and finite");
  MAGRPO_REQUIRE(cfg.episodes >= 1, "train config: need at least one episode");
}

namespace {

MemberTrajectory run_member(Environment& env,
                            const std::vector<PolicyParams>& policies,
                            const TaskSpec& task, RngStream* rng) {
  int n = env.num_agents();
  MAGRPO_REQUIRE(static_cast<int>(policies.size()) == n,
                 "rollout: one policy per agent required");
  std::vector<Observation> pending = env.reset(task);
  MAGRPO_REQUIRE(static_cast<int>(pending.size()) == n,
                 "rollout: reset must emit one observation per agent");

  std::vector<History> histories(n);
  std::vector<ResponseAction> prev(n);
  MemberTrajectory traj;
  for (int t = 0; !env.done(); ++t) {
    MemberTurn turn;
    turn.keys.resize(n);
    std::vector<ResponseAction> actions;
    actions.reserve(n);
    for (AgentId i = 0; i < n; ++i) {
      Observation o = pending[i];
      if (env.sequential() && i > 0) {
        o = env.observation_with_peer(i, std::move(o), actions);
      }
      histories[i] = t == 0 ? make_history(i, o)
                            : history_append(std::move(histories[i]), prev[i], o);
      turn.keys[i] = canonical_history_key(histories[i]);
      int idx = rng ? sample_action(policies[i], turn.keys[i], *rng)
                    : greedy_action(policies[i], turn.keys[i]);
      actions.push_back(env.action_from_catalog(i, idx));
    }
    turn.joint.actions = actions;
    StepOutcome out = env.step(turn.joint);
    turn.joint_reward = out.reward;
    turn.breakdown = out.breakdown;
    turn.per_agent_rewards = std::move(out.per_agent_rewards);
    traj.turns.push_back(std::move(turn));
    pending = std::move(out.observations);
    prev = std::move(actions);
  }
  return traj;
}

GroupRollout start_rollout(const std::vector<std::unique_ptr<Environment>>& envs,
                           const std::vector<PolicyParams>& policies,
                           const TaskSpec& task) {
  MAGRPO_REQUIRE(envs.size() >= 2, "collect_group_rollouts: group size below 2");
  GroupRollout r;
  r.task = task;
  r.num_agents = envs[0]->num_agents();
  r.horizon = envs[0]->horizon();
  for (const PolicyParams& p : policies) r.policy_versions.push_back(p.version);
  r.members.resize(envs.size());
  return r;
}

}  // namespace

MemberTrajectory rollout_episode(Environment& env,
                                 const std::vector<PolicyParams>& policies,
                                 const TaskSpec& task, RngStream* rng) {
  return run_member(env, policies, task, rng);
}

GroupRollout collect_group_rollouts_serial(
    const std::vector<std::unique_ptr<Environment>>& envs,
    const std::vector<PolicyParams>& policies, const TaskSpec& task,
    std::uint64_t seed, std::uint64_t episode) {
  GroupRollout r = start_rollout(envs, policies, task);
  for (std::size_t g = 0; g < envs.size(); ++g) {
    RngStream rng = derive_stream(seed, {kMemberLabel, episode, g});
    r.members[g] = run_member(*envs[g], policies, task, &rng);
  }
  return r;
}

GroupRollout collect_group_rollouts_parallel(
    const std::vector<std::unique_ptr<Environment>>& envs,
    const std::vector<PolicyParams>& policies, const TaskSpec& task,
    std::uint64_t seed, std::uint64_t episode) {
  GroupRollout r = start_rollout(envs, policies, task);
  int G = static_cast<int>(envs.size());
  std::vector<std::exception_ptr> errors(G);
#pragma omp parallel for schedule(static)
  for (int g = 0; g < G; ++g) {
    try {
      RngStream rng =
          derive_stream(seed, {kMemberLabel, episode, static_cast<std::uint64_t>(g)});
      r.members[g] = run_member(*envs[g], policies, task, &rng);
    } catch (...) {
      errors[g] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return r;
}

GroupRollout collect_group_rollouts(
    const std::vector<std::unique_ptr<Environment>>& envs,
    const std::vector<PolicyParams>& policies, const TaskSpec& task,
    std::uint64_t seed, std::uint64_t episode, bool parallel) {
  return parallel
             ? collect_group_rollouts_parallel(envs, policies, task, seed, episode)
             : collect_group_rollouts_serial(envs, policies, task, seed, episode);
}

std::string serialize_rollout(const GroupRollout& r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "task " << r.task.task_id << " target " << r.task.target_value << "\n";
  for (std::size_t g = 0; g < r.members.size(); ++g) {
    out << "member " << g << "\n";
    for (const MemberTurn& t : r.members[g].turns) {
      out << " turn";
      for (const ResponseAction& a : t.joint.actions) out << " " << a.catalog_index;
      out << " reward " << t.joint_reward;
      if (t.per_agent_rewards) {
        out << " split";
        for (double v : *t.per_agent_rewards) out << " " << v;
      }
      out << "\n";
      for (const std::string& k : t.keys) out << "  key " << k << "\n";
    }
  }
  return out.str();
}

ReturnTable compute_returns(const GroupRollout& r) {
  ReturnTable table;
  for (const MemberTrajectory& m : r.members) {
    std::vector<double> values(m.turns.size(), 0.0);
    double acc = 0.0;
    for (int t = static_cast<int>(m.turns.size()) - 1; t >= 0; --t) {
      acc += m.turns[t].joint_reward;
      values[t] = acc;
    }
    table.values.push_back(std::move(values));
  }
  return table;
}

ReturnTable compute_returns_for_agent(const GroupRollout& r, AgentId agent) {
  ReturnTable table;
  for (const MemberTrajectory& m : r.members) {
    std::vector<double> values(m.turns.size(), 0.0);
    double acc = 0.0;
    for (int t = static_cast<int>(m.turns.size()) - 1; t >= 0; --t) {
      const MemberTurn& turn = m.turns[t];
      MAGRPO_REQUIRE(turn.per_agent_rewards &&
                         agent < static_cast<AgentId>(turn.per_agent_rewards->size()),
                     "per-agent returns need a reward decomposition from the "
                     "environment");
      acc += (*turn.per_agent_rewards)[agent];
      values[t] = acc;
    }
    table.values.push_back(std::move(values));
  }
  return table;
}

BranchPartition branch_partition(const GroupRollout& r, BranchMode mode) {
  int G = static_cast<int>(r.members.size());
  BranchPartition p;
  p.branches.resize(r.horizon);
  for (int t = 0; t < r.horizon; ++t) {
    if (mode == BranchMode::whole_group) {
      std::vector<int> all(G);
      for (int g = 0; g < G; ++g) all[g] = g;
      p.branches[t].push_back(std::move(all));
      continue;
    }
    // Branches form in order of first appearance, which is also the order of
    // their smallest member.
    std::map<std::string, int> index;
    for (int g = 0; g < G; ++g) {
      MAGRPO_REQUIRE(t < static_cast<int>(r.members[g].turns.size()),
                     "branch_partition: trajectory shorter than the horizon");
      std::string joint_key;
      for (const std::string& k : r.members[g].turns[t].keys) {
        joint_key += k;
        joint_key += '\n';
      }
      auto [it, fresh] = index.emplace(joint_key, static_cast<int>(p.branches[t].size()));
      if (fresh) p.branches[t].emplace_back();
      p.branches[t][it->second].push_back(g);
    }
  }
  return p;
}

AdvantageTable compute_advantages(const ReturnTable& returns,
                                  const BranchPartition& partition) {
  AdvantageTable adv;
  adv.values.resize(returns.values.size());
  for (std::size_t g = 0; g < returns.values.size(); ++g) {
    adv.values[g].assign(returns.values[g].size(), 0.0);
  }
  for (std::size_t t = 0; t < partition.branches.size(); ++t) {
    for (const std::vector<int>& branch : partition.branches[t]) {
      MAGRPO_REQUIRE(!branch.empty(), "compute_advantages: empty branch");
      double sum = 0.0;
      for (int g : branch) {
        MAGRPO_REQUIRE(t < returns.values[g].size(),
                       "compute_advantages: return table shorter than partition");
        sum += returns.values[g][t];
      }
      double mean = sum / static_cast<double>(branch.size());
      for (int g : branch) adv.values[g][t] = returns.values[g][t] - mean;
    }
  }
  return adv;
}

std::vector<LogitGradient> accumulate_objective_gradient(
    const GroupRollout& r, const BranchPartition& partition,
    const std::vector<AdvantageTable>& per_agent_adv,
    const std::vector<PolicyParams>& policies) {
  MAGRPO_REQUIRE(per_agent_adv.size() == policies.size(),
                 "objective gradient: one advantage table per agent");
  for (std::size_t i = 0; i < policies.size(); ++i) {
    MAGRPO_REQUIRE(policies[i].version == r.policy_versions[i],
                   "objective gradient: rollout was collected under a different "
                   "policy snapshot");
  }
  std::vector<LogitGradient> grads(policies.size());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    grads[i].catalog_size = policies[i].catalog_size;
  }
  for (std::size_t t = 0; t < partition.branches.size(); ++t) {
    double n_branches = static_cast<double>(partition.branches[t].size());
    for (const std::vector<int>& branch : partition.branches[t]) {
      double coeff = 1.0 / (n_branches * static_cast<double>(branch.size()));
      for (int g : branch) {
        const MemberTurn& turn = r.members[g].turns[t];
        for (std::size_t i = 0; i < policies.size(); ++i) {
          std::vector<double> row = log_prob_gradient(
              policies[i], turn.keys[i], turn.joint.actions[i].catalog_index);
          grads[i].add(turn.keys[i], row,
                       coeff * per_agent_adv[i].values[g][t]);
        }
      }
    }
  }
  return grads;
}

namespace {

EpisodeStats episode_stats(int episode, const GroupRollout& r) {
  EpisodeStats s;
  s.episode = episode;
  int G = static_cast<int>(r.members.size());
  s.turn_reward_mean.assign(r.horizon, 0.0);
  std::vector<double> totals(G, 0.0);
  bool have_breakdown = true;
  std::array<double, 4> levels{};
  for (int g = 0; g < G; ++g) {
    for (int t = 0; t < r.horizon; ++t) {
      const MemberTurn& turn = r.members[g].turns[t];
      s.turn_reward_mean[t] += turn.joint_reward;
      totals[g] += turn.joint_reward;
      if (turn.breakdown) {
        for (int l = 0; l < 4; ++l) levels[l] += turn.breakdown->levels[l];
      } else {
        have_breakdown = false;
      }
    }
  }
  for (double& v : s.turn_reward_mean) v /= G;
  double mean = 0.0;
  for (double v : totals) mean += v;
  mean /= G;
  double var = 0.0;
  for (double v : totals) var += (v - mean) * (v - mean);
  s.total_return_mean = mean;
  s.total_return_std = std::sqrt(var / G);
  if (have_breakdown) {
    for (double& v : levels) v /= static_cast<double>(G) * r.horizon;
    s.ladder_level_mean = levels;
  }
  return s;
}

TrainResult run_training(const TrainConfig& cfg, const EnvFactory& factory,
                         const std::vector<TaskSpec>& dataset,
                         std::vector<PolicyParams> policies, bool independent,
                         const EpisodeCallback& cb) {
  validate_train_config(cfg);
  MAGRPO_REQUIRE(!dataset.empty(), "train: task dataset is empty");

  std::vector<std::unique_ptr<Environment>> envs;
  envs.reserve(cfg.group_size);
  for (int g = 0; g < cfg.group_size; ++g) envs.push_back(factory());
  MAGRPO_REQUIRE(envs[0] != nullptr, "train: environment factory returned null");

  int n = envs[0]->num_agents();
  MAGRPO_REQUIRE(static_cast<int>(policies.size()) == n,
                 "train: one policy per agent required");
  MAGRPO_REQUIRE(envs[0]->horizon() == cfg.horizon,
                 "train: config horizon does not match the environment");
  for (AgentId i = 0; i < n; ++i) {
    MAGRPO_REQUIRE(policies[i].catalog_size == envs[0]->catalog_size(i),
                   "train: policy catalog does not match the environment");
  }

  TrainResult result;
  for (int e = 0; e < cfg.episodes; ++e) {
    auto t0 = std::chrono::steady_clock::now();
    RngStream task_rng = derive_stream(cfg.seed, {kTaskLabel, static_cast<std::uint64_t>(e)});
    const TaskSpec& task = dataset[task_rng.next_below(dataset.size())];

    GroupRollout rollout = collect_group_rollouts(envs, policies, task, cfg.seed,
                                                  e, cfg.parallel);
    BranchPartition partition = branch_partition(rollout, cfg.branch_mode);

    std::vector<AdvantageTable> adv;
    if (independent) {
      for (AgentId i = 0; i < n; ++i) {
        adv.push_back(
            compute_advantages(compute_returns_for_agent(rollout, i), partition));
      }
    } else {
      AdvantageTable shared =
          compute_advantages(compute_returns(rollout), partition);
      adv.assign(n, shared);
    }

    std::vector<LogitGradient> grads =
        accumulate_objective_gradient(rollout, partition, adv, policies);
    for (AgentId i = 0; i < n; ++i) {
      policies[i] =
          apply_update(std::move(policies[i]), grads[i], cfg.learning_rate);
    }

    EpisodeStats stats = episode_stats(e, rollout);
    stats.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  t0)
            .count();
    if (cb) cb(stats);
    result.stats.push_back(std::move(stats));
  }
  result.policies = std::move(policies);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const EnvFactory& factory,
                  const std::vector<TaskSpec>& dataset,
                  std::vector<PolicyParams> policies, const EpisodeCallback& cb) {
  return run_training(cfg, factory, dataset, std::move(policies), false, cb);
}

TrainResult train_independent(const TrainConfig& cfg, const EnvFactory& factory,
                              const std::vector<TaskSpec>& dataset,
                              std::vector<PolicyParams> policies,
                              const EpisodeCallback& cb) {
  return run_training(cfg, factory, dataset, std::move(policies), true, cb);
}

}  // namespace magrpo
