#include "magrpo/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "magrpo/rng.hpp"

namespace magrpo::harness {

using nlohmann::json;

const char* kMetricsSchemaLine = "{\"schema\":\"magrpo-metrics\",\"version\":1}";

// ---------------------------------------------------------------------------
// Config parsing

namespace {

const std::set<std::string> kTopKeys = {"env", "train", "eval", "seed"};
const std::set<std::string> kEnvKeys = {"name",     "preset",     "dataset",
                                        "horizon",  "feedback",   "sequential",
                                        "weights",  "joint",      "u1",
                                        "u2"};
const std::set<std::string> kMatrixEnvKeys = {"name", "preset", "horizon",
                                              "joint", "u1", "u2"};
const std::set<std::string> kCoopEnvKeys = {"name",    "preset",
                                            "dataset", "horizon",
                                            "feedback", "sequential",
                                            "weights"};
const std::set<std::string> kTrainKeys = {"method",        "group_size",
                                          "learning_rate", "episodes",
                                          "branch_mode",   "parallel"};
const std::set<std::string> kEvalKeys = {"samples", "k", "ma_window"};

struct Checker {
  std::vector<std::string>& v;

  void reject_unknown(const json& o, const std::set<std::string>& allowed,
                      const std::string& where) {
    for (const auto& item : o.items()) {
      if (!allowed.count(item.key())) {
        v.push_back(where + ": unknown key '" + item.key() + "'");
      }
    }
  }

  bool get_string(const json& o, const std::string& where, const std::string& key,
                  std::string* dst) {
    if (!o.contains(key)) return false;
    if (!o[key].is_string()) {
      v.push_back(where + "." + key + ": expected a string");
      return false;
    }
    *dst = o[key].get<std::string>();
    return true;
  }

  bool get_int(const json& o, const std::string& where, const std::string& key,
               int* dst) {
    if (!o.contains(key)) return false;
    if (!o[key].is_number_integer()) {
      v.push_back(where + "." + key + ": expected an integer");
      return false;
    }
    *dst = o[key].get<int>();
    return true;
  }

  bool get_double(const json& o, const std::string& where, const std::string& key,
                  double* dst) {
    if (!o.contains(key)) return false;
    if (!o[key].is_number()) {
      v.push_back(where + "." + key + ": expected a number");
      return false;
    }
    *dst = o[key].get<double>();
    return true;
  }

  bool get_bool(const json& o, const std::string& where, const std::string& key,
                bool* dst) {
    if (!o.contains(key)) return false;
    if (!o[key].is_boolean()) {
      v.push_back(where + "." + key + ": expected a boolean");
      return false;
    }
    *dst = o[key].get<bool>();
    return true;
  }

  bool get_matrix(const json& o, const std::string& where, const std::string& key,
                  std::optional<std::array<double, 4>>* dst) {
    if (!o.contains(key)) return false;
    const json& a = o[key];
    if (!a.is_array() || a.size() != 4 ||
        !std::all_of(a.begin(), a.end(),
                     [](const json& x) { return x.is_number(); })) {
      v.push_back(where + "." + key + ": expected an array of 4 numbers");
      return false;
    }
    std::array<double, 4> m;
    for (int i = 0; i < 4; ++i) m[i] = a[i].get<double>();
    *dst = m;
    return true;
  }
};

void parse_env(const json& o, EnvSection* env, std::vector<std::string>& v) {
  Checker c{v};
  if (!o.is_object()) {
    v.push_back("env: expected an object");
    return;
  }
  c.reject_unknown(o, kEnvKeys, "env");
  if (!c.get_string(o, "env", "name", &env->name)) {
    if (!o.contains("name")) v.push_back("env.name: missing required key");
    return;
  }
  if (env->name != "matrix_game" && env->name != "coop_assembly") {
    v.push_back("env.name: must be 'matrix_game' or 'coop_assembly'");
    return;
  }

  const std::set<std::string>& applicable =
      env->name == "matrix_game" ? kMatrixEnvKeys : kCoopEnvKeys;
  for (const auto& item : o.items()) {
    if (kEnvKeys.count(item.key()) && !applicable.count(item.key())) {
      v.push_back("env." + item.key() + ": not applicable to " + env->name);
    }
  }

  c.get_string(o, "env", "preset", &env->preset);
  c.get_int(o, "env", "horizon", &env->horizon);

  if (env->name == "matrix_game") {
    if (!o.contains("horizon")) env->horizon = 1;
    if (env->horizon != 1) v.push_back("env.horizon: matrix games are one-shot");
    c.get_matrix(o, "env", "joint", &env->joint);
    c.get_matrix(o, "env", "u1", &env->u1);
    c.get_matrix(o, "env", "u2", &env->u2);
    bool custom = env->joint || env->u1 || env->u2;
    if (custom && !env->preset.empty()) {
      v.push_back("env: give a preset or explicit matrices, not both");
    }
    if (custom && !env->joint) {
      v.push_back("env.joint: required when building a custom matrix game");
    }
    if (env->u1.has_value() != env->u2.has_value()) {
      v.push_back("env: a decomposition needs both u1 and u2");
    }
    if (env->joint && env->u1 && env->u2) {
      for (int i = 0; i < 4; ++i) {
        if (std::abs((*env->u1)[i] + (*env->u2)[i] - (*env->joint)[i]) > 1e-12) {
          v.push_back("env: u1 + u2 must reproduce joint cell-by-cell");
          break;
        }
      }
    }
    if (!custom) {
      if (env->preset.empty()) env->preset = "joint_only";
      if (env->preset != "joint_only" && env->preset != "posg1" &&
          env->preset != "posg2") {
        v.push_back("env.preset: matrix presets are joint_only, posg1, posg2");
      }
    }
  } else {
    if (env->preset.empty()) env->preset = "default";
    if (env->preset != "default") {
      v.push_back("env.preset: the only coop_assembly preset is 'default'");
    }
    std::string path;
    if (c.get_string(o, "env", "dataset", &path)) env->dataset_path = path;
    if (!o.contains("horizon")) env->horizon = 2;
    if (env->horizon < 1) v.push_back("env.horizon: must be at least 1");
    std::string fb;
    if (c.get_string(o, "env", "feedback", &fb)) {
      if (fb == "self_evolving") {
        env->feedback = envs::FeedbackMode::self_evolving;
      } else if (fb == "guided") {
        env->feedback = envs::FeedbackMode::guided;
      } else {
        v.push_back("env.feedback: must be 'self_evolving' or 'guided'");
      }
    }
    c.get_bool(o, "env", "sequential", &env->sequential);
    std::optional<std::array<double, 4>> w;
    if (c.get_matrix(o, "env", "weights", &w)) {
      env->weights = envs::LadderWeights{(*w)[0], (*w)[1], (*w)[2], (*w)[3]};
      double sum = (*w)[0] + (*w)[1] + (*w)[2] + (*w)[3];
      if ((*w)[0] < 0 || (*w)[1] < 0 || (*w)[2] < 0 || (*w)[3] < 0) {
        v.push_back("env.weights: entries must be nonnegative");
      } else if (std::abs(sum - 1.0) > 1e-12) {
        v.push_back("env.weights: entries must sum to 1");
      }
    }
  }
}

void parse_train(const json& o, TrainSection* t, std::vector<std::string>& v) {
  Checker c{v};
  if (!o.is_object()) {
    v.push_back("train: expected an object");
    return;
  }
  c.reject_unknown(o, kTrainKeys, "train");
  c.get_string(o, "train", "method", &t->method);
  if (t->method != "magrpo" && t->method != "independent" &&
      t->method != "single_agent") {
    v.push_back("train.method: must be 'magrpo', 'independent', or 'single_agent'");
  }
  c.get_int(o, "train", "group_size", &t->group_size);
  if (t->group_size < 2) {
    v.push_back(
        "train.group_size: must be at least 2; a group of one centers every "
        "advantage to zero");
  }
  c.get_double(o, "train", "learning_rate", &t->learning_rate);
  if (!(std::isfinite(t->learning_rate) && t->learning_rate > 0)) {
    v.push_back("train.learning_rate: must be positive and finite");
  }
  c.get_int(o, "train", "episodes", &t->episodes);
  if (t->episodes < 1) v.push_back("train.episodes: must be at least 1");
  std::string bm;
  if (c.get_string(o, "train", "branch_mode", &bm)) {
    if (bm == "whole_group") {
      t->branch_mode = BranchMode::whole_group;
    } else if (bm == "shared_prefix") {
      t->branch_mode = BranchMode::shared_prefix;
    } else {
      v.push_back("train.branch_mode: must be 'whole_group' or 'shared_prefix'");
    }
  }
  c.get_bool(o, "train", "parallel", &t->parallel);
}

void parse_eval(const json& o, EvalSection* e, std::vector<std::string>& v) {
  Checker c{v};
  if (!o.is_object()) {
    v.push_back("eval: expected an object");
    return;
  }
  c.reject_unknown(o, kEvalKeys, "eval");
  c.get_int(o, "eval", "samples", &e->samples);
  if (e->samples < 1) v.push_back("eval.samples: must be at least 1");
  if (o.contains("k")) {
    const json& a = o["k"];
    if (!a.is_array() || a.empty() ||
        !std::all_of(a.begin(), a.end(),
                     [](const json& x) { return x.is_number_integer(); })) {
      v.push_back("eval.k: expected a non-empty array of integers");
    } else {
      e->k.clear();
      for (const json& x : a) e->k.push_back(x.get<int>());
      for (int k : e->k) {
        if (k < 1 || k > e->samples) {
          v.push_back("eval.k: every k must satisfy 1 <= k <= samples");
          break;
        }
      }
    }
  }
  c.get_int(o, "eval", "ma_window", &e->ma_window);
  if (e->ma_window < 0) v.push_back("eval.ma_window: must be nonnegative");
}

}  // namespace

ParseOutcome parse_config_text(const std::string& text) {
  ParseOutcome out;
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) {
    out.violations.push_back("config is not valid JSON");
    return out;
  }
  if (!root.is_object()) {
    out.violations.push_back("config must be a JSON object");
    return out;
  }
  ExperimentConfig c;
  std::vector<std::string>& v = out.violations;
  Checker ck{v};
  ck.reject_unknown(root, kTopKeys, "config");

  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer()) {
      v.push_back("seed: expected a nonnegative integer");
    } else if (root["seed"].is_number_integer() && root["seed"].get<long long>() < 0) {
      v.push_back("seed: expected a nonnegative integer");
    } else {
      c.seed = root["seed"].get<std::uint64_t>();
    }
  }
  if (!root.contains("env")) {
    v.push_back("env: missing required section");
  } else {
    parse_env(root["env"], &c.env, v);
  }
  if (root.contains("train")) parse_train(root["train"], &c.train, v);
  if (root.contains("eval")) parse_eval(root["eval"], &c.eval, v);

  // Cross-section rules need a healthy env section.
  if (v.empty() && c.train.method == "independent") {
    bool decomposed = c.env.name == "matrix_game" &&
                      (c.env.preset == "posg1" || c.env.preset == "posg2" ||
                       (c.env.u1 && c.env.u2));
    if (!decomposed) {
      v.push_back(
          "train.method: 'independent' needs a per-agent reward decomposition "
          "(a posg preset or explicit u1/u2)");
    }
  }

  if (!v.empty()) return out;
  out.config = std::move(c);
  return out;
}

ParseOutcome parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) {
    ParseOutcome out;
    out.violations.push_back("cannot read config file: " + path);
    return out;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  json env;
  env["name"] = c.env.name;
  if (c.env.name == "matrix_game") {
    if (c.env.joint) {
      env["joint"] = *c.env.joint;
      if (c.env.u1) env["u1"] = *c.env.u1;
      if (c.env.u2) env["u2"] = *c.env.u2;
    } else {
      env["preset"] = c.env.preset;
    }
    env["horizon"] = c.env.horizon;
  } else {
    env["preset"] = c.env.preset;
    if (c.env.dataset_path) env["dataset"] = *c.env.dataset_path;
    env["horizon"] = c.env.horizon;
    env["feedback"] = c.env.feedback == envs::FeedbackMode::guided
                          ? "guided"
                          : "self_evolving";
    env["sequential"] = c.env.sequential;
    env["weights"] = {c.env.weights.structure, c.env.weights.syntax,
                      c.env.weights.test, c.env.weights.cooperation};
  }
  json train;
  train["method"] = c.train.method;
  train["group_size"] = c.train.group_size;
  train["learning_rate"] = c.train.learning_rate;
  train["episodes"] = c.train.episodes;
  train["branch_mode"] = c.train.branch_mode == BranchMode::shared_prefix
                             ? "shared_prefix"
                             : "whole_group";
  train["parallel"] = c.train.parallel;
  json eval;
  eval["samples"] = c.eval.samples;
  eval["k"] = c.eval.k;
  eval["ma_window"] = c.eval.ma_window;
  json root;
  root["env"] = env;
  root["train"] = train;
  root["eval"] = eval;
  root["seed"] = c.seed;
  return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Environment and dataset construction

namespace {

envs::MatrixGameSpec resolve_matrix_spec(const EnvSection& env) {
  if (env.joint) {
    envs::MatrixGameSpec spec;
    spec.joint = *env.joint;
    spec.u1 = env.u1;
    spec.u2 = env.u2;
    return spec;
  }
  if (env.preset == "posg1") return envs::posg1_game();
  if (env.preset == "posg2") return envs::posg2_game();
  return envs::joint_only_game();
}

envs::Dataset resolve_coop_dataset(const EnvSection& env) {
  if (env.dataset_path) return envs::load_dataset(*env.dataset_path);
  return envs::default_dataset();
}

}  // namespace

EnvFactory build_env_factory(const ExperimentConfig& c) {
  EnvFactory base;
  if (c.env.name == "matrix_game") {
    envs::MatrixGameSpec spec = resolve_matrix_spec(c.env);
    base = [spec] { return std::make_unique<envs::MatrixGameEnv>(spec); };
  } else {
    envs::Dataset data = resolve_coop_dataset(c.env);
    envs::CoopAssemblyConfig cfg;
    cfg.aux = data.aux;
    cfg.main = data.main;
    cfg.horizon = c.env.horizon;
    cfg.feedback = c.env.feedback;
    cfg.sequential_mode = c.env.sequential;
    cfg.weights = c.env.weights;
    base = [cfg] { return std::make_unique<envs::CoopAssemblyEnv>(cfg); };
  }
  if (c.train.method == "single_agent") {
    return [base] { return std::make_unique<envs::SingleAgentWrapper>(base()); };
  }
  return base;
}

std::vector<TaskSpec> build_dataset(const ExperimentConfig& c) {
  if (c.env.name == "matrix_game") return {TaskSpec{0, 0, "play"}};
  return resolve_coop_dataset(c.env).tasks;
}

std::vector<PolicyParams> initial_policies(const ExperimentConfig& c) {
  std::unique_ptr<Environment> env = build_env_factory(c)();
  std::vector<PolicyParams> policies;
  for (AgentId i = 0; i < env->num_agents(); ++i) {
    policies.push_back(make_policy(i, env->catalog_size(i)));
  }
  return policies;
}

// ---------------------------------------------------------------------------
// Training runner

namespace {

std::string metric_record_json(const EpisodeStats& s) {
  json j;
  j["episode"] = s.episode;
  j["turn_reward_mean"] = s.turn_reward_mean;
  j["total_return_mean"] = s.total_return_mean;
  j["total_return_std"] = s.total_return_std;
  if (s.ladder_level_mean) {
    j["ladder_level_mean"] = *s.ladder_level_mean;
  }
  return j.dump();
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& c, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  RunArtifacts artifacts;
  artifacts.metrics_path = out_dir + "/metrics.jsonl";
  artifacts.checkpoint_path = out_dir + "/policy.txt";

  std::ofstream metrics(artifacts.metrics_path);
  MAGRPO_REQUIRE(metrics.good(),
                 "run_experiment: cannot open " + artifacts.metrics_path);
  metrics << kMetricsSchemaLine << "\n";
  metrics.flush();

  try {
    EnvFactory factory = build_env_factory(c);
    std::vector<TaskSpec> dataset = build_dataset(c);
    std::vector<PolicyParams> policies = initial_policies(c);

    TrainConfig tc;
    tc.group_size = c.train.group_size;
    tc.horizon = c.env.horizon;
    tc.learning_rate = c.train.learning_rate;
    tc.episodes = c.train.episodes;
    tc.branch_mode = c.train.branch_mode;
    tc.seed = c.seed;
    tc.parallel = c.train.parallel;

    EpisodeCallback cb = [&metrics](const EpisodeStats& s) {
      metrics << metric_record_json(s) << "\n";
      metrics.flush();
    };

    TrainResult result = c.train.method == "independent"
                             ? train_independent(tc, factory, dataset,
                                                 std::move(policies), cb)
                             : train(tc, factory, dataset, std::move(policies), cb);

    save_policies(result.policies, artifacts.checkpoint_path);
    artifacts.stats = std::move(result.stats);
    return artifacts;
  } catch (const std::exception& e) {
    std::ofstream marker(out_dir + "/FAILED");
    marker << e.what() << "\n";
    throw;
  }
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport evaluate(const ExperimentConfig& c,
                    const std::vector<PolicyParams>& policies) {
  EnvFactory factory = build_env_factory(c);
  std::unique_ptr<Environment> env = factory();
  int n = env->num_agents();
  MAGRPO_REQUIRE(static_cast<int>(policies.size()) == n,
                 "evaluate: checkpoint agent count does not match the environment");
  for (AgentId i = 0; i < n; ++i) {
    MAGRPO_REQUIRE(policies[i].catalog_size == env->catalog_size(i),
                   "evaluate: checkpoint catalog does not match the environment");
  }
  std::vector<TaskSpec> dataset = build_dataset(c);

  EvalReport r;
  r.samples = c.eval.samples;
  double sum = 0.0, sumsq = 0.0;
  std::array<double, 4> levels{};
  int level_turns = 0;
  bool any_breakdown = false;
  for (int s = 0; s < c.eval.samples; ++s) {
    RngStream rng = derive_stream(c.seed, {kEvalLabel, static_cast<std::uint64_t>(s)});
    const TaskSpec& task = dataset[rng.next_below(dataset.size())];
    MemberTrajectory traj = rollout_episode(*env, policies, task, &rng);
    double total = 0.0;
    for (const MemberTurn& t : traj.turns) {
      total += t.joint_reward;
      if (t.breakdown) {
        any_breakdown = true;
        for (int l = 0; l < 4; ++l) levels[l] += t.breakdown->levels[l];
        ++level_turns;
      }
    }
    sum += total;
    sumsq += total * total;
    if (!traj.turns.empty() && traj.turns.back().breakdown &&
        traj.turns.back().breakdown->test_fraction == 1.0) {
      ++r.pass_count;
    }
  }
  r.total_return_mean = sum / c.eval.samples;
  double var = sumsq / c.eval.samples - r.total_return_mean * r.total_return_mean;
  r.total_return_std = std::sqrt(var > 0 ? var : 0.0);

  double greedy_sum = 0.0;
  for (const TaskSpec& task : dataset) {
    MemberTrajectory traj = rollout_episode(*env, policies, task, nullptr);
    for (const MemberTurn& t : traj.turns) greedy_sum += t.joint_reward;
  }
  r.greedy_total_return = greedy_sum / static_cast<double>(dataset.size());

  if (any_breakdown) {
    for (double& v : levels) v /= level_turns;
    r.ladder_level_mean = levels;
    for (int k : c.eval.k) {
      r.pass_at.emplace_back(k, envs::pass_at_k(c.eval.samples, r.pass_count, k));
    }
  }
  return r;
}

std::string eval_report_json(const EvalReport& r) {
  json j;
  j["samples"] = r.samples;
  j["total_return_mean"] = r.total_return_mean;
  j["total_return_std"] = r.total_return_std;
  j["greedy_total_return"] = r.greedy_total_return;
  if (r.ladder_level_mean) {
    j["ladder_level_mean"] = *r.ladder_level_mean;
    j["pass_count"] = r.pass_count;
    json pk = json::object();
    for (const auto& [k, v] : r.pass_at) pk[std::to_string(k)] = v;
    j["pass_at_k"] = pk;
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Game analysis

std::string analyze_game(const ExperimentConfig& c) {
  MAGRPO_REQUIRE(c.env.name == "matrix_game",
                 "analyze_game: config does not describe a matrix game");
  envs::MatrixGameSpec spec = resolve_matrix_spec(c.env);
  MAGRPO_REQUIRE(spec.u1 && spec.u2,
                 "analyze_game: analysis needs a per-player decomposition "
                 "(posg preset or explicit u1/u2)");
  gametheory::BimatrixGame g{*spec.u1, *spec.u2};
  return gametheory::format_report(gametheory::suboptimality_report(g, spec.joint));
}

// ---------------------------------------------------------------------------
// Plot export

namespace {

struct PlotRow {
  int episode = 0;
  double mean = 0.0;
  double stdev = 0.0;
  std::vector<double> turns;
  std::optional<std::array<double, 4>> ladder;
};

}  // namespace

int export_plot_data(const std::string& log_path, const std::string& csv_path,
                     int ma_window) {
  MAGRPO_REQUIRE(ma_window >= 0, "export_plot_data: window must be nonnegative");
  std::ifstream in(log_path);
  MAGRPO_REQUIRE(in.good(), "export_plot_data: cannot open " + log_path);

  std::string line;
  MAGRPO_REQUIRE(std::getline(in, line), "export_plot_data: empty file, no schema tag");
  {
    json tag = json::parse(line, nullptr, false);
    MAGRPO_REQUIRE(!tag.is_discarded() && tag.is_object() &&
                       tag.value("schema", "") == "magrpo-metrics" &&
                       tag.value("version", 0) == 1,
                   "export_plot_data: unrecognized metrics schema");
  }

  int skipped = 0;
  std::vector<PlotRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("episode") ||
        !j["episode"].is_number_integer() || !j.contains("total_return_mean") ||
        !j["total_return_mean"].is_number() ||
        !j.contains("total_return_std") || !j["total_return_std"].is_number() ||
        !j.contains("turn_reward_mean") || !j["turn_reward_mean"].is_array()) {
      ++skipped;
      continue;
    }
    PlotRow r;
    r.episode = j["episode"].get<int>();
    r.mean = j["total_return_mean"].get<double>();
    r.stdev = j["total_return_std"].get<double>();
    bool ok = true;
    for (const json& x : j["turn_reward_mean"]) {
      if (!x.is_number()) {
        ok = false;
        break;
      }
      r.turns.push_back(x.get<double>());
    }
    if (j.contains("ladder_level_mean")) {
      const json& a = j["ladder_level_mean"];
      if (a.is_array() && a.size() == 4 &&
          std::all_of(a.begin(), a.end(),
                      [](const json& x) { return x.is_number(); })) {
        std::array<double, 4> lv;
        for (int l = 0; l < 4; ++l) lv[l] = a[l].get<double>();
        r.ladder = lv;
      } else {
        ok = false;
      }
    }
    if (!ok || (!rows.empty() && (r.turns.size() != rows[0].turns.size() ||
                                  r.ladder.has_value() != rows[0].ladder.has_value()))) {
      ++skipped;
      continue;
    }
    rows.push_back(std::move(r));
  }

  std::ofstream out(csv_path);
  MAGRPO_REQUIRE(out.good(), "export_plot_data: cannot open " + csv_path);
  out << std::setprecision(17);
  out << "episode,total_return_mean,total_return_std";
  std::size_t n_turns = rows.empty() ? 0 : rows[0].turns.size();
  bool have_ladder = !rows.empty() && rows[0].ladder.has_value();
  for (std::size_t t = 0; t < n_turns; ++t) out << ",turn" << t + 1 << "_reward";
  if (have_ladder) {
    out << ",level_structure,level_syntax,level_test,level_coop";
  }
  if (ma_window > 0) out << ",total_return_ma";
  out << "\n";

  double ma_acc = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const PlotRow& r = rows[i];
    out << r.episode << "," << r.mean << "," << r.stdev;
    for (double v : r.turns) out << "," << v;
    if (have_ladder) {
      for (double v : *r.ladder) out << "," << v;
    }
    if (ma_window > 0) {
      ma_acc += r.mean;
      if (i >= static_cast<std::size_t>(ma_window)) ma_acc -= rows[i - ma_window].mean;
      std::size_t denom = std::min<std::size_t>(i + 1, ma_window);
      out << "," << ma_acc / static_cast<double>(denom);
    }
    out << "\n";
  }
  MAGRPO_REQUIRE(out.good(), "export_plot_data: write failed for " + csv_path);
  return skipped;
}

}  // namespace magrpo::harness
