#include "magrpo/core.hpp"

#include <sstream>

namespace magrpo {

History make_history(AgentId agent, const Observation& first) {
  MAGRPO_REQUIRE(first.agent == agent,
                 "make_history: observation addressed to a different agent");
  History h;
  h.agent = agent;
  h.observations.push_back(first);
  return h;
}

History history_append(History h, const ResponseAction& a, const Observation& o) {
  MAGRPO_REQUIRE(h.awaiting_action(),
                 "history_append: history must end with an observation");
  MAGRPO_REQUIRE(a.catalog_index >= 0,
                 "history_append: action has no catalog index");
  MAGRPO_REQUIRE(o.agent == h.agent,
                 "history_append: observation addressed to a different agent");
  h.actions.push_back(a);
  h.observations.push_back(o);
  return h;
}

namespace {

// Percent-escapes the separator characters and anything non-printable so the
// serialized entries cannot collide and the key stays single-line.
void escape_into(const std::string& s, std::ostringstream& out) {
  static const char* hex = "0123456789abcdef";
  for (unsigned char c : s) {
    if (c == '%' || c == ';' || c == '=' || c < 0x20 || c >= 0x7f) {
      out << '%' << hex[c >> 4] << hex[c & 0xf];
    } else {
      out << c;
    }
  }
}

}  // namespace

std::string canonical_history_key(const History& h) {
  MAGRPO_REQUIRE(!h.observations.empty(), "canonical_history_key: empty history");
  MAGRPO_REQUIRE(h.observations.size() == h.actions.size() + 1 ||
                     h.observations.size() == h.actions.size(),
                 "canonical_history_key: broken alternation");
  std::ostringstream out;
  out << 'a' << h.agent;
  for (std::size_t i = 0; i < h.observations.size(); ++i) {
    out << ";o=";
    escape_into(h.observations[i].text, out);
    if (i < h.actions.size()) out << ";x=" << h.actions[i].catalog_index;
  }
  return out.str();
}

}  // namespace magrpo
