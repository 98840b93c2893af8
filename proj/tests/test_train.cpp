#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "magrpo/envs.hpp"
#include "magrpo/train.hpp"

using namespace magrpo;

namespace {

// Two-agent, two-action environment with an arbitrary per-turn payout table.
// Rewards are supplied by the test, observations are fixed per turn, so two
// instances differing only by a constant reward shift walk identical key
// structures.
class TableEnv : public Environment {
 public:
  TableEnv(std::vector<std::array<double, 4>> tables, double shift)
      : tables_(std::move(tables)), shift_(shift) {}

  int num_agents() const override { return 2; }
  int horizon() const override { return static_cast<int>(tables_.size()); }
  int catalog_size(AgentId) const override { return 2; }
  ResponseAction action_from_catalog(AgentId, int index) const override {
    MAGRPO_REQUIRE(index == 0 || index == 1, "TableEnv: bad action index");
    return ResponseAction{index, index == 0 ? "L" : "R"};
  }
  std::vector<Observation> reset(const TaskSpec& task) override {
    state_ = AccessibleState{};
    state_.task = task;
    done_ = false;
    return {Observation{0, 0, "t0"}, Observation{1, 0, "t0"}};
  }
  StepOutcome step(const JointAction& joint) override {
    MAGRPO_REQUIRE(!done_, "TableEnv: episode over");
    int t = state_.turn();
    int cell = joint.actions[0].catalog_index * 2 + joint.actions[1].catalog_index;
    StepOutcome out;
    out.reward = tables_[t][cell] + shift_;
    state_.interaction_record.push_back(TurnRecord{joint, out.reward, {}});
    done_ = state_.turn() == horizon();
    out.done = done_;
    if (!done_) {
      std::string text = "t" + std::to_string(state_.turn());
      out.observations = {Observation{0, state_.turn(), text},
                          Observation{1, state_.turn(), text}};
    }
    return out;
  }
  bool done() const override { return done_; }
  const AccessibleState& accessible_state() const override { return state_; }

 private:
  std::vector<std::array<double, 4>> tables_;
  double shift_;
  AccessibleState state_;
  bool done_ = true;
};

GroupRollout synthetic_rollout(const std::vector<std::vector<double>>& rewards) {
  GroupRollout r;
  r.num_agents = 2;
  r.horizon = static_cast<int>(rewards[0].size());
  for (const std::vector<double>& member : rewards) {
    MemberTrajectory traj;
    for (double reward : member) {
      MemberTurn turn;
      turn.keys = {"a0;o=x", "a1;o=x"};
      turn.joint_reward = reward;
      traj.turns.push_back(turn);
    }
    r.members.push_back(traj);
  }
  return r;
}

std::vector<std::unique_ptr<Environment>> table_envs(
    int count, const std::vector<std::array<double, 4>>& tables, double shift) {
  std::vector<std::unique_ptr<Environment>> envs;
  for (int g = 0; g < count; ++g) {
    envs.push_back(std::make_unique<TableEnv>(tables, shift));
  }
  return envs;
}

std::string checkpoint_bytes(const std::vector<PolicyParams>& policies) {
  const char* path = "train_ckpt_tmp.txt";
  save_policies(policies, path);
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::remove(path);
  return buf.str();
}

}  // namespace

TEST_CASE("returns are undiscounted suffix sums") {
  GroupRollout r = synthetic_rollout({{1, 2, 3}, {0.5, -1, 4}});
  ReturnTable t = compute_returns(r);
  CHECK(t.values[0] == std::vector<double>{6, 5, 3});
  CHECK(t.values[1] == std::vector<double>{3.5, 3, 4});
}

TEST_CASE("advantages center the published one-shot payoffs") {
  GroupRollout r = synthetic_rollout({{10}, {7}, {7}, {0}});
  BranchPartition p = branch_partition(r, BranchMode::whole_group);
  AdvantageTable a = compute_advantages(compute_returns(r), p);
  CHECK(a.values[0][0] == 4.0);
  CHECK(a.values[1][0] == 1.0);
  CHECK(a.values[2][0] == 1.0);
  CHECK(a.values[3][0] == -6.0);
}

TEST_CASE("advantages have zero mean within every branch") {
  RngStream rng(derive_key(51, {0x7a65726f}));
  for (int trial = 0; trial < 1000; ++trial) {
    int group = 2 + static_cast<int>(rng.next_below(7));
    int horizon = 1 + static_cast<int>(rng.next_below(3));
    std::vector<std::vector<double>> rewards(group);
    for (auto& member : rewards) {
      for (int t = 0; t < horizon; ++t) {
        member.push_back((rng.next_double() - 0.5) * 20.0);
      }
    }
    GroupRollout r = synthetic_rollout(rewards);
    // Scatter members across synthetic key branches at later turns.
    for (int g = 0; g < group; ++g) {
      for (int t = 1; t < horizon; ++t) {
        std::string suffix = std::to_string(rng.next_below(3));
        r.members[g].turns[t].keys = {"a0;o=b" + suffix, "a1;o=b" + suffix};
      }
    }
    for (BranchMode mode : {BranchMode::whole_group, BranchMode::shared_prefix}) {
      BranchPartition p = branch_partition(r, mode);
      AdvantageTable a = compute_advantages(compute_returns(r), p);
      for (int t = 0; t < horizon; ++t) {
        for (const std::vector<int>& branch : p.branches[t]) {
          double sum = 0.0;
          for (int g : branch) sum += a.values[g][t];
          CHECK(std::abs(sum) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("shared-prefix branches group identical key tuples in member order") {
  GroupRollout r = synthetic_rollout({{1, 1}, {2, 2}, {3, 3}, {4, 4}});
  r.members[0].turns[1].keys = {"a0;o=p", "a1;o=p"};
  r.members[1].turns[1].keys = {"a0;o=q", "a1;o=q"};
  r.members[2].turns[1].keys = {"a0;o=p", "a1;o=p"};
  r.members[3].turns[1].keys = {"a0;o=r", "a1;o=r"};

  BranchPartition p = branch_partition(r, BranchMode::shared_prefix);
  REQUIRE(p.branches[0].size() == 1);  // same conditioning at the first turn
  CHECK(p.branches[0][0] == std::vector<int>{0, 1, 2, 3});
  REQUIRE(p.branches[1].size() == 3);
  CHECK(p.branches[1][0] == std::vector<int>{0, 2});
  CHECK(p.branches[1][1] == std::vector<int>{1});
  CHECK(p.branches[1][2] == std::vector<int>{3});

  // A member alone in its branch is its own baseline.
  AdvantageTable a = compute_advantages(compute_returns(r), p);
  CHECK(a.values[1][1] == 0.0);
  CHECK(a.values[3][1] == 0.0);

  // Differing per-agent keys must split the branch even if one agent matches.
  GroupRollout half = synthetic_rollout({{1, 1}, {2, 2}});
  half.members[0].turns[1].keys = {"a0;o=same", "a1;o=left"};
  half.members[1].turns[1].keys = {"a0;o=same", "a1;o=right"};
  BranchPartition hp = branch_partition(half, BranchMode::shared_prefix);
  CHECK(hp.branches[1].size() == 2);
}

TEST_CASE("whole-group mode keeps one branch at every turn") {
  GroupRollout r = synthetic_rollout({{1, 2}, {3, 4}, {5, 6}});
  r.members[0].turns[1].keys = {"a0;o=p", "a1;o=p"};
  BranchPartition p = branch_partition(r, BranchMode::whole_group);
  for (const auto& turn_branches : p.branches) {
    REQUIRE(turn_branches.size() == 1);
    CHECK(turn_branches[0] == std::vector<int>{0, 1, 2});
  }
}

TEST_CASE("rollout collection is deterministic and parallel-identical") {
  std::vector<std::array<double, 4>> tables = {{1, 2, 3, 4}, {0, 1, 0, 1}};
  auto envs = table_envs(16, tables, 0.0);
  std::vector<PolicyParams> policies = {make_policy(0, 2), make_policy(1, 2)};
  TaskSpec task{1, 0, "t"};

  GroupRollout a = collect_group_rollouts_serial(envs, policies, task, 9, 4);
  GroupRollout b = collect_group_rollouts_serial(envs, policies, task, 9, 4);
  GroupRollout c = collect_group_rollouts_parallel(envs, policies, task, 9, 4);
  CHECK(serialize_rollout(a) == serialize_rollout(b));
  CHECK(serialize_rollout(a) == serialize_rollout(c));

  GroupRollout other_episode =
      collect_group_rollouts_serial(envs, policies, task, 9, 5);
  GroupRollout other_seed =
      collect_group_rollouts_serial(envs, policies, task, 10, 4);
  CHECK(serialize_rollout(a) != serialize_rollout(other_episode));
  CHECK(serialize_rollout(a) != serialize_rollout(other_seed));
}

TEST_CASE("a constant reward shift leaves learning bit-identical") {
  // Dyadic rewards (eighths), integer shift, power-of-two group size: every
  // advantage is computed exactly, so the shift cancels to the last bit.
  std::vector<std::array<double, 4>> base = {
      {1.0 / 8, 3.0 / 8, 5.0 / 8, 7.0 / 8},
      {2.0 / 8, 6.0 / 8, 1.0 / 8, 4.0 / 8},
  };
  TrainConfig cfg;
  cfg.group_size = 8;
  cfg.horizon = 2;
  cfg.learning_rate = 0.5;
  cfg.episodes = 40;
  cfg.seed = 21;
  cfg.parallel = false;

  std::vector<TaskSpec> dataset = {TaskSpec{1, 0, "t"}};
  auto run_with_shift = [&](double shift) {
    EnvFactory factory = [&base, shift] {
      return std::make_unique<TableEnv>(base, shift);
    };
    TrainResult r = train(cfg, factory, dataset,
                          {make_policy(0, 2), make_policy(1, 2)});
    return checkpoint_bytes(r.policies);
  };

  std::string plain = run_with_shift(0.0);
  CHECK(run_with_shift(5.0) == plain);
  CHECK(run_with_shift(-3.0) == plain);
  CHECK(run_with_shift(1.0) == plain);
}

TEST_CASE("a constant reward shift cancels in shared-prefix advantages") {
  // Branch sizes here are not powers of two, so the mean division may round;
  // the cancellation is exact in real arithmetic and within an ulp here.
  RngStream rng(derive_key(53, {0x73686674}));
  for (int trial = 0; trial < 200; ++trial) {
    int group = 3 + static_cast<int>(rng.next_below(6));
    std::vector<std::vector<double>> rewards(group);
    for (auto& member : rewards) {
      member = {(rng.next_double() - 0.5) * 8, (rng.next_double() - 0.5) * 8};
    }
    GroupRollout base = synthetic_rollout(rewards);
    for (int g = 0; g < group; ++g) {
      std::string suffix = std::to_string(rng.next_below(3));
      base.members[g].turns[1].keys = {"a0;o=b" + suffix, "a1;o=b" + suffix};
    }
    GroupRollout shifted = base;
    double c = 4.0;
    for (auto& member : shifted.members) {
      for (auto& turn : member.turns) turn.joint_reward += c;
    }
    BranchPartition p = branch_partition(base, BranchMode::shared_prefix);
    AdvantageTable a0 = compute_advantages(compute_returns(base), p);
    AdvantageTable a1 = compute_advantages(compute_returns(shifted), p);
    for (int g = 0; g < group; ++g) {
      for (int t = 0; t < 2; ++t) {
        CHECK(std::abs(a0.values[g][t] - a1.values[g][t]) < 1e-12);
      }
    }
  }
}

TEST_CASE("accumulated gradient matches full enumeration on a one-shot game") {
  // Analytic value per agent i, entry j:
  //   sum_cells P(cell) * (r(cell) - E[r]) * (1{a_i = j} - p_i[j])
  envs::MatrixGameSpec spec = envs::joint_only_game();
  std::vector<PolicyParams> policies = {make_policy(0, 2), make_policy(1, 2)};
  const std::string key0 = "a0;o=matrix game";
  const std::string key1 = "a1;o=matrix game";
  policies[0].logits[key0] = {0.4, -0.2};
  policies[1].logits[key1] = {-0.7, 0.3};
  std::vector<double> p0 = action_distribution(policies[0], key0);
  std::vector<double> p1 = action_distribution(policies[1], key1);

  double mean_r = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) mean_r += p0[a] * p1[b] * spec.joint[a * 2 + b];
  }
  std::array<std::array<double, 2>, 2> analytic{};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      double centered = spec.joint[a * 2 + b] - mean_r;
      double prob = p0[a] * p1[b];
      for (int j = 0; j < 2; ++j) {
        analytic[0][j] += prob * centered * ((j == a ? 1.0 : 0.0) - p0[j]);
        analytic[1][j] += prob * centered * ((j == b ? 1.0 : 0.0) - p1[j]);
      }
    }
  }

  const int group = 10000;
  std::vector<std::unique_ptr<Environment>> envs;
  for (int g = 0; g < group; ++g) {
    envs.push_back(std::make_unique<envs::MatrixGameEnv>(spec));
  }
  GroupRollout r =
      collect_group_rollouts_serial(envs, policies, TaskSpec{}, 77, 0);
  BranchPartition part = branch_partition(r, BranchMode::whole_group);
  ReturnTable returns = compute_returns(r);
  AdvantageTable adv = compute_advantages(returns, part);
  std::vector<AdvantageTable> per_agent = {adv, adv};
  std::vector<LogitGradient> grads =
      accumulate_objective_gradient(r, part, per_agent, policies);

  // Empirical spread of the per-member terms gives the tolerance.
  for (int agent = 0; agent < 2; ++agent) {
    const std::string& key = agent == 0 ? key0 : key1;
    const std::vector<double>& probs = agent == 0 ? p0 : p1;
    REQUIRE(grads[agent].rows.count(key) == 1);
    for (int j = 0; j < 2; ++j) {
      double mc = grads[agent].rows[key][j];
      double sumsq = 0.0;
      for (int g = 0; g < group; ++g) {
        int act = r.members[g].turns[0].joint.actions[agent].catalog_index;
        double term = adv.values[g][0] * ((j == act ? 1.0 : 0.0) - probs[j]);
        sumsq += term * term;
      }
      double se = std::sqrt(sumsq / group - (mc * group / group) * mc) /
                  std::sqrt(static_cast<double>(group));
      CHECK(std::abs(mc - analytic[agent][j]) < 3 * se + 1e-9);
    }
  }
}

TEST_CASE("zero rewards leave the policies numerically untouched") {
  std::vector<std::array<double, 4>> flat = {{0, 0, 0, 0}, {0, 0, 0, 0}};
  TrainConfig cfg;
  cfg.group_size = 4;
  cfg.horizon = 2;
  cfg.episodes = 5;
  cfg.seed = 2;
  cfg.parallel = false;
  EnvFactory factory = [&flat] { return std::make_unique<TableEnv>(flat, 0.0); };
  TrainResult r = train(cfg, factory, {TaskSpec{1, 0, "t"}},
                        {make_policy(0, 2), make_policy(1, 2)});
  CHECK(r.policies[0].version == 5);
  for (const PolicyParams& p : r.policies) {
    for (const auto& [key, row] : p.logits) {
      for (double v : row) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("gradient accumulation rejects a stale policy snapshot") {
  std::vector<std::array<double, 4>> tables = {{1, 2, 3, 4}};
  auto envs = table_envs(4, tables, 0.0);
  std::vector<PolicyParams> policies = {make_policy(0, 2), make_policy(1, 2)};
  GroupRollout r =
      collect_group_rollouts_serial(envs, policies, TaskSpec{1, 0, "t"}, 1, 0);
  BranchPartition part = branch_partition(r, BranchMode::whole_group);
  AdvantageTable adv = compute_advantages(compute_returns(r), part);
  std::vector<AdvantageTable> per_agent = {adv, adv};

  LogitGradient empty;
  empty.catalog_size = 2;
  policies[0] = apply_update(policies[0], empty, 0.1);  // version moves on
  CHECK_THROWS_AS(
      accumulate_objective_gradient(r, part, per_agent, policies),
      ContractError);
}

TEST_CASE("per-agent returns need a reward decomposition") {
  std::vector<std::array<double, 4>> tables = {{1, 2, 3, 4}};
  auto envs = table_envs(2, tables, 0.0);
  std::vector<PolicyParams> policies = {make_policy(0, 2), make_policy(1, 2)};
  GroupRollout r =
      collect_group_rollouts_serial(envs, policies, TaskSpec{1, 0, "t"}, 1, 0);
  CHECK_THROWS_AS(compute_returns_for_agent(r, 0), ContractError);

  std::vector<std::unique_ptr<Environment>> posg;
  posg.push_back(std::make_unique<envs::MatrixGameEnv>(envs::posg2_game()));
  posg.push_back(std::make_unique<envs::MatrixGameEnv>(envs::posg2_game()));
  GroupRollout r2 =
      collect_group_rollouts_serial(posg, policies, TaskSpec{}, 1, 0);
  ReturnTable u1 = compute_returns_for_agent(r2, 0);
  ReturnTable u2 = compute_returns_for_agent(r2, 1);
  ReturnTable joint = compute_returns(r2);
  for (int g = 0; g < 2; ++g) {
    CHECK(u1.values[g][0] + u2.values[g][0] == joint.values[g][0]);
  }
}

TEST_CASE("train config validation names each violation") {
  TrainConfig ok;
  CHECK_NOTHROW(validate_train_config(ok));

  TrainConfig small = ok;
  small.group_size = 1;
  try {
    validate_train_config(small);
    FAIL("expected a ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("at least 2") != std::string::npos);
  }

  TrainConfig bad = ok;
  bad.horizon = 0;
  CHECK_THROWS_AS(validate_train_config(bad), ContractError);
  bad = ok;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(validate_train_config(bad), ContractError);
  bad = ok;
  bad.learning_rate = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate_train_config(bad), ContractError);
  bad = ok;
  bad.episodes = 0;
  CHECK_THROWS_AS(validate_train_config(bad), ContractError);
}

TEST_CASE("training drives the one-shot game to its joint optimum") {
  TrainConfig cfg;
  cfg.group_size = 32;
  cfg.horizon = 1;
  cfg.learning_rate = 0.1;
  cfg.episodes = 200;
  cfg.seed = 3;
  EnvFactory factory = [] {
    return std::make_unique<envs::MatrixGameEnv>(envs::joint_only_game());
  };
  TrainResult r = train(cfg, factory, {TaskSpec{}},
                        {make_policy(0, 2), make_policy(1, 2)});
  REQUIRE(r.stats.size() == 200);
  CHECK(r.stats.back().total_return_mean > 9.0);
  CHECK(greedy_action(r.policies[0], "a0;o=matrix game") == 0);
  CHECK(greedy_action(r.policies[1], "a1;o=matrix game") == 0);
  CHECK(r.stats[0].turn_reward_mean.size() == 1);
  CHECK(!r.stats[0].ladder_level_mean.has_value());
}

TEST_CASE("independent training finds the aligned equilibrium of posg1") {
  TrainConfig cfg;
  cfg.group_size = 32;
  cfg.horizon = 1;
  cfg.learning_rate = 0.3;
  cfg.episodes = 300;
  cfg.seed = 5;
  EnvFactory factory = [] {
    return std::make_unique<envs::MatrixGameEnv>(envs::posg1_game());
  };
  TrainResult r = train_independent(cfg, factory, {TaskSpec{}},
                                    {make_policy(0, 2), make_policy(1, 2)});
  CHECK(greedy_action(r.policies[0], "a0;o=matrix game") == 0);
  CHECK(greedy_action(r.policies[1], "a1;o=matrix game") == 0);
  CHECK(r.stats.back().total_return_mean > 9.0);
}

TEST_CASE("episode stats reproduce a hand-collected first episode") {
  envs::Dataset d = envs::default_dataset();
  envs::CoopAssemblyConfig ccfg;
  ccfg.aux = d.aux;
  ccfg.main = d.main;
  ccfg.horizon = 2;

  TrainConfig cfg;
  cfg.group_size = 6;
  cfg.horizon = 2;
  cfg.learning_rate = 0.2;
  cfg.episodes = 1;
  cfg.seed = 11;
  cfg.parallel = false;
  EnvFactory factory = [&ccfg] {
    return std::make_unique<envs::CoopAssemblyEnv>(ccfg);
  };
  TrainResult r = train(cfg, factory, d.tasks,
                        {make_policy(0, d.aux.size()), make_policy(1, d.main.size())});
  REQUIRE(r.stats.size() == 1);
  const EpisodeStats& s = r.stats[0];

  RngStream task_rng = derive_stream(cfg.seed, {kTaskLabel, 0});
  const TaskSpec& task = d.tasks[task_rng.next_below(d.tasks.size())];
  std::vector<std::unique_ptr<Environment>> group;
  for (int g = 0; g < cfg.group_size; ++g) group.push_back(factory());
  std::vector<PolicyParams> fresh = {make_policy(0, d.aux.size()),
                                     make_policy(1, d.main.size())};
  GroupRollout rollout =
      collect_group_rollouts_serial(group, fresh, task, cfg.seed, 0);
  ReturnTable returns = compute_returns(rollout);
  double mean = 0.0;
  for (int g = 0; g < cfg.group_size; ++g) mean += returns.values[g][0];
  mean /= cfg.group_size;
  CHECK(s.total_return_mean == doctest::Approx(mean).epsilon(1e-12));
  REQUIRE(s.turn_reward_mean.size() == 2);
  REQUIRE(s.ladder_level_mean.has_value());
  double level_sum = (*s.ladder_level_mean)[0] + (*s.ladder_level_mean)[1] +
                     (*s.ladder_level_mean)[2] + (*s.ladder_level_mean)[3];
  double turn_mean_sum = (s.turn_reward_mean[0] + s.turn_reward_mean[1]) / 2.0;
  CHECK(level_sum == doctest::Approx(turn_mean_sum).epsilon(1e-9));
}

TEST_CASE("greedy and sampled rollouts are reproducible") {
  envs::MatrixGameEnv env(envs::joint_only_game());
  std::vector<PolicyParams> policies = {make_policy(0, 2), make_policy(1, 2)};
  policies[0].logits["a0;o=matrix game"] = {2.0, 0.0};
  policies[1].logits["a1;o=matrix game"] = {0.0, 2.0};

  MemberTrajectory greedy = rollout_episode(env, policies, TaskSpec{}, nullptr);
  REQUIRE(greedy.turns.size() == 1);
  CHECK(greedy.turns[0].joint.actions[0].catalog_index == 0);
  CHECK(greedy.turns[0].joint.actions[1].catalog_index == 1);
  CHECK(greedy.turns[0].joint_reward == 7.0);

  RngStream r1 = derive_stream(123, {kEvalLabel, 0});
  RngStream r2 = derive_stream(123, {kEvalLabel, 0});
  MemberTrajectory s1 = rollout_episode(env, policies, TaskSpec{}, &r1);
  MemberTrajectory s2 = rollout_episode(env, policies, TaskSpec{}, &r2);
  CHECK(s1.turns[0].joint.actions[0].catalog_index ==
        s2.turns[0].joint.actions[0].catalog_index);
  CHECK(s1.turns[0].joint.actions[1].catalog_index ==
        s2.turns[0].joint.actions[1].catalog_index);
}

TEST_CASE("group size below two is rejected up front") {
  std::vector<std::array<double, 4>> tables = {{1, 2, 3, 4}};
  auto envs = table_envs(1, tables, 0.0);
  std::vector<PolicyParams> policies = {make_policy(0, 2), make_policy(1, 2)};
  CHECK_THROWS_AS(
      collect_group_rollouts_serial(envs, policies, TaskSpec{1, 0, "t"}, 1, 0),
      ContractError);

  TrainConfig cfg;
  cfg.group_size = 1;
  EnvFactory factory = [&tables] {
    return std::make_unique<TableEnv>(tables, 0.0);
  };
  CHECK_THROWS_AS(
      train(cfg, factory, {TaskSpec{1, 0, "t"}}, policies), ContractError);
}
