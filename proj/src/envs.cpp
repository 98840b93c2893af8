#include "magrpo/envs.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "magrpo/expr.hpp"
#include "magrpo/rng.hpp"

namespace magrpo::envs {

ResponseAction ResponseCatalog::render(int index) const {
  MAGRPO_REQUIRE(index >= 0 && index < size(),
                 "ResponseCatalog::render: index out of range");
  return ResponseAction{index, entries[index]};
}

void validate_weights(const LadderWeights& w) {
  MAGRPO_REQUIRE(w.structure >= 0 && w.syntax >= 0 && w.test >= 0 &&
                     w.cooperation >= 0,
                 "ladder weights must be nonnegative");
  double sum = w.structure + w.syntax + w.test + w.cooperation;
  MAGRPO_REQUIRE(std::abs(sum - 1.0) <= 1e-12, "ladder weights must sum to 1");
}

// ---------------------------------------------------------------------------
// Reward ladder

namespace {

// "NAME = body" with a nonempty body.
bool structure_ok(const std::string& rendered, const std::string& name,
                  std::string* body) {
  std::string prefix = name + " = ";
  if (rendered.size() <= prefix.size()) return false;
  if (rendered.compare(0, prefix.size(), prefix) != 0) return false;
  *body = rendered.substr(prefix.size());
  for (char c : *body) {
    if (c != ' ') return true;
  }
  return false;
}

}  // namespace

LadderGates evaluate_ladder(const std::string& aux_rendered,
                            const std::string& main_rendered,
                            const TaskSpec& task) {
  LadderGates g;
  std::string aux_body, main_body;
  g.structure_aux = structure_ok(aux_rendered, "AUX", &aux_body);
  g.structure_main = structure_ok(main_rendered, "MAIN", &main_body);
  if (!g.structure_aux || !g.structure_main) return g;

  EvalResult aux_res = evaluate_expression(aux_body, std::nullopt);
  g.syntax_aux = aux_res.status != EvalStatus::parse_error;
  // Parse check only; bind AUX to a dummy so an AUX reference is not a
  // failure at this level.
  g.syntax_main =
      evaluate_expression(main_body, 0).status != EvalStatus::parse_error;
  if (!g.syntax_aux || !g.syntax_main) return g;

  std::optional<long long> aux_value;
  if (aux_res.status == EvalStatus::ok) aux_value = aux_res.value;
  EvalResult main_res = evaluate_expression(main_body, aux_value);
  if (main_res.status == EvalStatus::ok) {
    g.main_value = main_res.value;
    g.test_fraction = main_res.value == task.target_value ? 1.0 : 0.0;
  }
  g.cooperation = g.test_fraction == 1.0 && main_res.used_aux;
  return g;
}

LadderResult ladder_reward(const ResponseAction& aux, const ResponseAction& main,
                           const TaskSpec& task, const LadderWeights& weights) {
  validate_weights(weights);
  LadderGates g = evaluate_ladder(aux.rendered, main.rendered, task);

  LadderResult r;
  bool structures = g.structure_aux && g.structure_main;
  bool syntaxes = structures && g.syntax_aux && g.syntax_main;
  r.breakdown.levels[0] = structures ? weights.structure : 0.0;
  r.breakdown.levels[1] = syntaxes ? weights.syntax : 0.0;
  r.breakdown.levels[2] = syntaxes ? weights.test * g.test_fraction : 0.0;
  bool coop = syntaxes && g.test_fraction == 1.0 && g.cooperation;
  r.breakdown.levels[3] = coop ? weights.cooperation : 0.0;
  r.breakdown.test_fraction = syntaxes ? g.test_fraction : 0.0;
  r.breakdown.full_pass = coop;
  r.total = r.breakdown.levels[0] + r.breakdown.levels[1] +
            r.breakdown.levels[2] + r.breakdown.levels[3];
  return r;
}

Observation generate_feedback(const AccessibleState& record, FeedbackMode mode,
                              AgentId agent) {
  MAGRPO_REQUIRE(record.turn() >= 1, "generate_feedback: no previous turn");
  const TurnRecord& last = record.interaction_record.back();
  MAGRPO_REQUIRE(last.joint_action.actions.size() == 2,
                 "generate_feedback: expected a two-agent turn");
  const std::string& aux_r = last.joint_action.actions[0].rendered;
  const std::string& main_r = last.joint_action.actions[1].rendered;

  std::string text = "prev aux: " + aux_r + " ; prev main: " + main_r;
  if (mode == FeedbackMode::guided) {
    LadderGates g = evaluate_ladder(aux_r, main_r, record.task);
    std::string tag;
    auto side = [](bool aux_ok, bool main_ok) {
      return !aux_ok && !main_ok ? "both" : (!aux_ok ? "aux" : "main");
    };
    if (!g.structure_aux || !g.structure_main) {
      tag = std::string("FAIL_STRUCT(") + side(g.structure_aux, g.structure_main) + ")";
    } else if (!g.syntax_aux || !g.syntax_main) {
      tag = std::string("FAIL_SYNTAX(") + side(g.syntax_aux, g.syntax_main) + ")";
    } else if (g.test_fraction < 1.0) {
      if (g.main_value) {
        tag = *g.main_value < record.task.target_value ? "FAIL_TEST(low)"
                                                       : "FAIL_TEST(high)";
      } else {
        tag = "FAIL_TEST(unresolved)";
      }
    } else if (!g.cooperation) {
      tag = "FAIL_COOP";
    } else {
      tag = "ALL_PASS";
    }
    text += " ; " + tag;
  }
  return Observation{agent, record.turn(), text};
}

// ---------------------------------------------------------------------------
// Matrix game

MatrixGameSpec joint_only_game() { return {{10, 7, 7, 0}, {}, {}}; }

MatrixGameSpec posg1_game() {
  return {{10, 7, 7, 0},
          std::array<double, 4>{5, 3, 4, 0},
          std::array<double, 4>{5, 4, 3, 0}};
}

MatrixGameSpec posg2_game() {
  return {{10, 7, 7, 0},
          std::array<double, 4>{5, 1, 6, 0},
          std::array<double, 4>{5, 6, 1, 0}};
}

MatrixGameEnv::MatrixGameEnv(const MatrixGameSpec& spec) : spec_(spec) {
  MAGRPO_REQUIRE(spec_.u1.has_value() == spec_.u2.has_value(),
                 "matrix game: decomposition needs both per-player tables");
  if (spec_.u1) {
    for (int i = 0; i < 4; ++i) {
      MAGRPO_REQUIRE(
          std::abs((*spec_.u1)[i] + (*spec_.u2)[i] - spec_.joint[i]) <= 1e-12,
          "matrix game: per-player tables must sum to the joint table");
    }
  }
}

int MatrixGameEnv::catalog_size(AgentId agent) const {
  MAGRPO_REQUIRE(agent == 0 || agent == 1, "matrix game: bad agent id");
  return 2;
}

ResponseAction MatrixGameEnv::action_from_catalog(AgentId agent, int index) const {
  MAGRPO_REQUIRE(agent == 0 || agent == 1, "matrix game: bad agent id");
  MAGRPO_REQUIRE(index == 0 || index == 1, "matrix game: bad action index");
  return ResponseAction{index, index == 0 ? "A1" : "A2"};
}

std::vector<Observation> MatrixGameEnv::reset(const TaskSpec& task) {
  state_ = AccessibleState{task, {}};
  user_ = UserState{};
  started_ = true;
  done_ = false;
  return {Observation{0, 0, "matrix game"}, Observation{1, 0, "matrix game"}};
}

StepOutcome MatrixGameEnv::step(const JointAction& joint) {
  MAGRPO_REQUIRE(started_, "matrix game: step before reset");
  MAGRPO_REQUIRE(!done_, "matrix game: step after the episode ended");
  MAGRPO_REQUIRE(joint.actions.size() == 2, "matrix game: need two actions");
  for (AgentId i = 0; i < 2; ++i) {
    const ResponseAction& a = joint.actions[i];
    MAGRPO_REQUIRE(a.catalog_index == 0 || a.catalog_index == 1,
                   "matrix game: action index out of range");
    MAGRPO_REQUIRE(a.rendered == action_from_catalog(i, a.catalog_index).rendered,
                   "matrix game: rendered text does not match the catalog");
  }
  int cell = joint.actions[0].catalog_index * 2 + joint.actions[1].catalog_index;

  StepOutcome out;
  out.reward = spec_.joint[cell];
  out.done = true;
  if (spec_.u1) {
    out.per_agent_rewards = std::vector<double>{(*spec_.u1)[cell], (*spec_.u2)[cell]};
  }
  state_.interaction_record.push_back(TurnRecord{joint, out.reward, {}});
  done_ = true;
  return out;
}

// ---------------------------------------------------------------------------
// Cooperative assembly

CoopAssemblyEnv::CoopAssemblyEnv(CoopAssemblyConfig cfg) : cfg_(std::move(cfg)) {
  MAGRPO_REQUIRE(cfg_.horizon >= 1, "coop assembly: horizon must be positive");
  MAGRPO_REQUIRE(cfg_.aux.size() > 0 && cfg_.main.size() > 0,
                 "coop assembly: catalogs must be non-empty");
  validate_weights(cfg_.weights);
  cfg_.aux.agent = 0;
  cfg_.main.agent = 1;
}

int CoopAssemblyEnv::catalog_size(AgentId agent) const {
  MAGRPO_REQUIRE(agent == 0 || agent == 1, "coop assembly: bad agent id");
  return agent == 0 ? cfg_.aux.size() : cfg_.main.size();
}

ResponseAction CoopAssemblyEnv::action_from_catalog(AgentId agent, int index) const {
  MAGRPO_REQUIRE(agent == 0 || agent == 1, "coop assembly: bad agent id");
  return agent == 0 ? cfg_.aux.render(index) : cfg_.main.render(index);
}

Observation CoopAssemblyEnv::observation_with_peer(
    AgentId agent, Observation base,
    const std::vector<ResponseAction>& earlier) const {
  if (!cfg_.sequential_mode || agent != 1 || earlier.empty()) return base;
  base.text += " | peer: " + earlier[0].rendered;
  return base;
}

std::vector<Observation> CoopAssemblyEnv::reset(const TaskSpec& task) {
  state_ = AccessibleState{task, {}};
  user_ = UserState{cfg_.user_style,
                    mix64(cfg_.user_style ^ static_cast<std::uint64_t>(task.task_id))};
  started_ = true;
  done_ = false;
  return {Observation{0, 0, "role aux | " + task.prompt_fragment},
          Observation{1, 0, "role main | " + task.prompt_fragment}};
}

StepOutcome CoopAssemblyEnv::step(const JointAction& joint) {
  MAGRPO_REQUIRE(started_, "coop assembly: step before reset");
  MAGRPO_REQUIRE(!done_, "coop assembly: step after the episode ended");
  MAGRPO_REQUIRE(joint.actions.size() == 2, "coop assembly: need two actions");
  for (AgentId i = 0; i < 2; ++i) {
    const ResponseAction& a = joint.actions[i];
    MAGRPO_REQUIRE(a.catalog_index >= 0 && a.catalog_index < catalog_size(i),
                   "coop assembly: action index out of range");
    MAGRPO_REQUIRE(a.rendered == action_from_catalog(i, a.catalog_index).rendered,
                   "coop assembly: rendered text does not match the catalog");
  }

  // Reward reads the task and the joint action; user state stays out of it.
  LadderResult ladder =
      ladder_reward(joint.actions[0], joint.actions[1], state_.task, cfg_.weights);
  user_.drift = mix64(user_.drift ^ static_cast<std::uint64_t>(
                                        joint.actions[0].catalog_index * 131 +
                                        joint.actions[1].catalog_index));

  StepOutcome out;
  out.reward = ladder.total;
  out.breakdown = ladder.breakdown;

  TurnRecord rec{joint, out.reward, {}};
  state_.interaction_record.push_back(rec);
  done_ = state_.turn() >= cfg_.horizon;
  out.done = done_;
  if (!done_) {
    out.observations = {generate_feedback(state_, cfg_.feedback, 0),
                        generate_feedback(state_, cfg_.feedback, 1)};
    state_.interaction_record.back().observations_emitted = out.observations;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single-policy wrapper

SingleAgentWrapper::SingleAgentWrapper(std::unique_ptr<Environment> inner)
    : inner_(std::move(inner)) {
  MAGRPO_REQUIRE(inner_ != nullptr, "single-agent wrapper: missing environment");
  MAGRPO_REQUIRE(inner_->num_agents() == 2,
                 "single-agent wrapper: inner environment must have two agents");
}

int SingleAgentWrapper::catalog_size(AgentId agent) const {
  MAGRPO_REQUIRE(agent == 0, "single-agent wrapper: bad agent id");
  return inner_->catalog_size(0) * inner_->catalog_size(1);
}

JointAction SingleAgentWrapper::decode(int index) const {
  int main_n = inner_->catalog_size(1);
  MAGRPO_REQUIRE(index >= 0 && index < catalog_size(0),
                 "single-agent wrapper: action index out of range");
  JointAction joint;
  joint.actions.push_back(inner_->action_from_catalog(0, index / main_n));
  joint.actions.push_back(inner_->action_from_catalog(1, index % main_n));
  return joint;
}

ResponseAction SingleAgentWrapper::action_from_catalog(AgentId agent,
                                                       int index) const {
  MAGRPO_REQUIRE(agent == 0, "single-agent wrapper: bad agent id");
  JointAction inner = decode(index);
  return ResponseAction{index, inner.actions[0].rendered + " & " +
                                   inner.actions[1].rendered};
}

std::vector<Observation> SingleAgentWrapper::reset(const TaskSpec& task) {
  std::vector<Observation> obs = inner_->reset(task);
  state_ = AccessibleState{task, {}};
  started_ = true;
  return {Observation{0, 0, obs[0].text + " || " + obs[1].text}};
}

StepOutcome SingleAgentWrapper::step(const JointAction& joint) {
  MAGRPO_REQUIRE(started_, "single-agent wrapper: step before reset");
  MAGRPO_REQUIRE(joint.actions.size() == 1, "single-agent wrapper: need one action");
  const ResponseAction& a = joint.actions[0];
  MAGRPO_REQUIRE(a.rendered == action_from_catalog(0, a.catalog_index).rendered,
                 "single-agent wrapper: rendered text does not match the catalog");

  StepOutcome out = inner_->step(decode(a.catalog_index));
  out.per_agent_rewards.reset();
  if (!out.observations.empty()) {
    out.observations = {Observation{0, out.observations[0].turn,
                                    out.observations[0].text + " || " +
                                        out.observations[1].text}};
  }
  state_.interaction_record.push_back(
      TurnRecord{joint, out.reward, out.observations});
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

Dataset default_dataset() {
  Dataset d;
  d.aux.agent = 0;
  d.aux.entries = {
      "AUX = 1",     "AUX = 2",     "AUX = 3",   "AUX = 2*2",
      "AUX = 5",     "AUX = 2*3",   "AUX = 3+4", "AUX = 2*2*2",
      "AUX = 3*3",   "AUX = 2*5+1", "AUX = 3*4", "AUX = 2+*3",
  };
  d.main.agent = 1;
  d.main.entries = {
      "MAIN = AUX",     "MAIN = AUX+1",   "MAIN = AUX+2",  "MAIN = AUX*2",
      "MAIN = AUX*3",   "MAIN = AUX+AUX", "MAIN = AUX*AUX", "MAIN = AUX*2+1",
      "MAIN = AUX+10",  "MAIN = 6",       "MAIN = 12",      "MAIN = AUX*+2",
  };
  const long long targets[] = {1,  2,  5,  7,  10, 11, 13, 14,
                               17, 18, 19, 21, 22, 24, 25, 36};
  int id = 1;
  for (long long t : targets) {
    std::ostringstream prompt;
    prompt << "target " << t;
    d.tasks.push_back(TaskSpec{id++, t, prompt.str()});
  }
  return d;
}

std::vector<std::string> validate_dataset(const Dataset& d) {
  std::vector<std::string> problems;
  if (d.tasks.empty()) problems.push_back("dataset has no tasks");
  if (d.aux.size() == 0) problems.push_back("aux catalog is empty");
  if (d.main.size() == 0) problems.push_back("main catalog is empty");
  std::set<int> ids;
  for (const TaskSpec& t : d.tasks) {
    if (!ids.insert(t.task_id).second) {
      problems.push_back("duplicate task id " + std::to_string(t.task_id));
    }
  }
  for (const TaskSpec& t : d.tasks) {
    bool reachable = false;
    for (const std::string& a : d.aux.entries) {
      for (const std::string& m : d.main.entries) {
        if (evaluate_ladder(a, m, t).test_fraction == 1.0) {
          reachable = true;
          break;
        }
      }
      if (reachable) break;
    }
    if (!reachable) {
      problems.push_back("task " + std::to_string(t.task_id) +
                         ": target not attainable by any catalog pair");
    }
  }
  return problems;
}

namespace {
constexpr const char* kDatasetTag = "magrpo-dataset v1";
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  MAGRPO_REQUIRE(out.good(), "save_dataset: cannot open " + path);
  out << kDatasetTag << "\n";
  for (const TaskSpec& t : d.tasks) {
    out << "task " << t.task_id << " " << t.target_value << " "
        << t.prompt_fragment << "\n";
  }
  for (const std::string& e : d.aux.entries) out << "aux " << e << "\n";
  for (const std::string& e : d.main.entries) out << "main " << e << "\n";
  MAGRPO_REQUIRE(out.good(), "save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  MAGRPO_REQUIRE(in.good(), "load_dataset: cannot open " + path);
  Dataset d;
  d.aux.agent = 0;
  d.main.agent = 1;
  std::vector<std::string> problems;
  std::string line;
  int lineno = 0;
  bool tagged = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != kDatasetTag) {
        problems.push_back("line 1: expected '" + std::string(kDatasetTag) + "'");
      }
      tagged = true;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "task") {
      TaskSpec t;
      if (!(ls >> t.task_id >> t.target_value)) {
        problems.push_back("line " + std::to_string(lineno) +
                           ": task record needs an id and a target");
        continue;
      }
      if (ls.peek() == ' ') ls.get();
      std::getline(ls, t.prompt_fragment);
      d.tasks.push_back(t);
    } else if (kind == "aux" || kind == "main") {
      if (line.size() <= kind.size() + 1) {
        problems.push_back("line " + std::to_string(lineno) + ": empty entry");
        continue;
      }
      std::string entry = line.substr(kind.size() + 1);
      (kind == "aux" ? d.aux : d.main).entries.push_back(entry);
    } else {
      problems.push_back("line " + std::to_string(lineno) +
                         ": unknown record type '" + kind + "'");
    }
  }
  if (!tagged) problems.push_back("empty file");
  for (const std::string& p : validate_dataset(d)) problems.push_back(p);
  if (!problems.empty()) {
    std::string msg = "load_dataset: " + path;
    for (const std::string& p : problems) msg += "\n  " + p;
    throw ContractError(msg);
  }
  return d;
}

// ---------------------------------------------------------------------------
// pass@k

double pass_at_k(int m, int c, int k) {
  MAGRPO_REQUIRE(m >= 1, "pass_at_k: need at least one sample");
  MAGRPO_REQUIRE(c >= 0 && c <= m, "pass_at_k: pass count out of range");
  MAGRPO_REQUIRE(k >= 1 && k <= m, "pass_at_k: k out of range");
  if (m - c < k) return 1.0;
  double fail = 1.0;
  for (int i = 0; i < k; ++i) {
    fail *= static_cast<double>(m - c - i) / static_cast<double>(m - i);
  }
  return 1.0 - fail;
}

}  // namespace magrpo::envs
