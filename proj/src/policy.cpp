#include "magrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace magrpo {

PolicyParams make_policy(AgentId agent, int catalog_size) {
  MAGRPO_REQUIRE(catalog_size >= 1, "make_policy: catalog must be non-empty");
  PolicyParams p;
  p.agent = agent;
  p.catalog_size = catalog_size;
  return p;
}

namespace {

const std::vector<double>* find_row(const PolicyParams& p, const std::string& key) {
  auto it = p.logits.find(key);
  if (it == p.logits.end()) return nullptr;
  MAGRPO_REQUIRE(static_cast<int>(it->second.size()) == p.catalog_size,
                 "policy row width does not match the catalog");
  return &it->second;
}

}  // namespace

std::vector<double> action_distribution(const PolicyParams& p,
                                        const std::string& key) {
  MAGRPO_REQUIRE(p.catalog_size >= 1, "action_distribution: empty catalog");
  const std::vector<double>* row = find_row(p, key);
  std::vector<double> probs(p.catalog_size);
  if (row == nullptr) {
    std::fill(probs.begin(), probs.end(), 1.0 / p.catalog_size);
    return probs;
  }
  double max_logit = *std::max_element(row->begin(), row->end());
  double z = 0.0;
  for (int i = 0; i < p.catalog_size; ++i) {
    probs[i] = std::exp((*row)[i] - max_logit);
    z += probs[i];
  }
  for (double& q : probs) q /= z;
  return probs;
}

int sample_action(const PolicyParams& p, const std::string& key, RngStream& rng) {
  return rng.categorical(action_distribution(p, key));
}

int greedy_action(const PolicyParams& p, const std::string& key) {
  std::vector<double> probs = action_distribution(p, key);
  int best = 0;
  for (int i = 1; i < p.catalog_size; ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

std::vector<double> log_prob_gradient(const PolicyParams& p,
                                      const std::string& key, int action) {
  MAGRPO_REQUIRE(action >= 0 && action < p.catalog_size,
                 "log_prob_gradient: action out of range");
  std::vector<double> g = action_distribution(p, key);
  for (double& v : g) v = -v;
  g[action] += 1.0;
  return g;
}

void LogitGradient::add(const std::string& key, const std::vector<double>& term,
                        double scale) {
  MAGRPO_REQUIRE(static_cast<int>(term.size()) == catalog_size,
                 "LogitGradient::add: row width mismatch");
  std::vector<double>& row = rows[key];
  if (row.empty()) row.assign(catalog_size, 0.0);
  for (int i = 0; i < catalog_size; ++i) row[i] += scale * term[i];
}

PolicyParams apply_update(PolicyParams p, const LogitGradient& g, double alpha) {
  MAGRPO_REQUIRE(g.catalog_size == p.catalog_size,
                 "apply_update: gradient catalog mismatch");
  MAGRPO_REQUIRE(std::isfinite(alpha), "apply_update: non-finite learning rate");
  for (const auto& [key, row] : g.rows) {
    std::vector<double>& target = p.logits[key];
    if (target.empty()) target.assign(p.catalog_size, 0.0);
    for (int i = 0; i < p.catalog_size; ++i) {
      MAGRPO_REQUIRE(std::isfinite(row[i]), "apply_update: non-finite gradient");
      target[i] += alpha * row[i];
      MAGRPO_REQUIRE(std::isfinite(target[i]), "apply_update: non-finite logit");
    }
  }
  ++p.version;
  return p;
}

namespace {
constexpr const char* kPolicyTag = "magrpo-policy v1";
}

void save_policies(const std::vector<PolicyParams>& policies,
                   const std::string& path) {
  std::ofstream out(path);
  MAGRPO_REQUIRE(out.good(), "save_policies: cannot open " + path);
  out << kPolicyTag << "\n";
  out << std::setprecision(17);
  for (const PolicyParams& p : policies) {
    out << "agent " << p.agent << " catalog " << p.catalog_size << " version "
        << p.version << "\n";
    for (const auto& [key, row] : p.logits) {  // std::map: sorted by key
      for (int a = 0; a < p.catalog_size; ++a) {
        out << key << "\t" << a << "\t" << row[a] << "\n";
      }
    }
  }
  MAGRPO_REQUIRE(out.good(), "save_policies: write failed for " + path);
}

std::vector<PolicyParams> load_policies(const std::string& path) {
  std::ifstream in(path);
  MAGRPO_REQUIRE(in.good(), "load_policies: cannot open " + path);
  std::string line;
  MAGRPO_REQUIRE(std::getline(in, line) && line == kPolicyTag,
                 "load_policies: missing or unknown format tag");
  std::vector<PolicyParams> policies;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.find('\t') == std::string::npos) {
      std::istringstream ls(line);
      std::string kw_agent, kw_catalog, kw_version;
      PolicyParams p;
      ls >> kw_agent >> p.agent >> kw_catalog >> p.catalog_size >> kw_version >>
          p.version;
      MAGRPO_REQUIRE(!ls.fail() && kw_agent == "agent" && kw_catalog == "catalog" &&
                         kw_version == "version",
                     "load_policies: bad section header at line " +
                         std::to_string(lineno));
      MAGRPO_REQUIRE(p.catalog_size >= 1,
                     "load_policies: bad catalog size at line " +
                         std::to_string(lineno));
      policies.push_back(std::move(p));
    } else {
      MAGRPO_REQUIRE(!policies.empty(),
                     "load_policies: row before any agent header at line " +
                         std::to_string(lineno));
      PolicyParams& p = policies.back();
      std::size_t t1 = line.find('\t');
      std::size_t t2 = line.find('\t', t1 + 1);
      MAGRPO_REQUIRE(t2 != std::string::npos,
                     "load_policies: bad row at line " + std::to_string(lineno));
      std::string key = line.substr(0, t1);
      int action = 0;
      double logit = 0.0;
      try {
        action = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
        logit = std::stod(line.substr(t2 + 1));
      } catch (const std::exception&) {
        throw ContractError("load_policies: bad row at line " +
                            std::to_string(lineno));
      }
      MAGRPO_REQUIRE(action >= 0 && action < p.catalog_size,
                     "load_policies: action out of range at line " +
                         std::to_string(lineno));
      std::vector<double>& row = p.logits[key];
      if (row.empty()) row.assign(p.catalog_size, 0.0);
      row[action] = logit;
    }
  }
  MAGRPO_REQUIRE(!policies.empty(), "load_policies: no agents in " + path);
  return policies;
}

}  // namespace magrpo
