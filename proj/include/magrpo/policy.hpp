#pragma once

// Tabular softmax policies over canonical history keys. A policy is a sparse
// logit table: keys never touched by an update stay implicit zeros, so every
// unseen history starts uniform over the agent's catalog.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "magrpo/core.hpp"
#include "magrpo/rng.hpp"

namespace magrpo {

struct PolicyParams {
  AgentId agent = 0;
  int catalog_size = 0;
  // Bumped by every update; rollouts record the version they were collected
  // under so stale-gradient bugs fail loudly instead of silently.
  std::uint64_t version = 0;
  std::map<std::string, std::vector<double>> logits;
};

PolicyParams make_policy(AgentId agent, int catalog_size);

// Max-shifted softmax over the key's logit row (implicit zeros for unseen
// keys). Entries sum to 1; an entry ~700+ nats below the max underflows to 0.
std::vector<double> action_distribution(const PolicyParams& p,
                                        const std::string& key);

int sample_action(const PolicyParams& p, const std::string& key, RngStream& rng);

// Argmax with lowest-index tie-break.
int greedy_action(const PolicyParams& p, const std::string& key);

// d/dlogit log pi(action | key): one-hot(action) - distribution. Rows sum to
// zero by construction.
std::vector<double> log_prob_gradient(const PolicyParams& p,
                                      const std::string& key, int action);

// Sparse per-agent gradient accumulator, same keying as the policy table.
struct LogitGradient {
  int catalog_size = 0;
  std::map<std::string, std::vector<double>> rows;

  void add(const std::string& key, const std::vector<double>& term, double scale);
};

// One plain gradient-ascent step: logits += alpha * gradient. Non-finite
// inputs are a contract error; the version counter advances.
PolicyParams apply_update(PolicyParams p, const LogitGradient& g, double alpha);

// Versioned, sorted, line-oriented checkpoint format:
//   magrpo-policy v1
//   agent <id> catalog <n> version <v>
//   <key>\t<action>\t<logit>
// Logits print with 17 significant digits, so save/load round-trips exactly.
void save_policies(const std::vector<PolicyParams>& policies,
                   const std::string& path);
std::vector<PolicyParams> load_policies(const std::string& path);

}  // namespace magrpo
