#pragma once

// The response body language: integer literals, '+', '*', and the symbol AUX.
// '*' binds tighter than '+'. Small enough to audit, rich enough to make
// cooperation (referencing AUX) worth rewarding.

#include <optional>
#include <string>

namespace magrpo {

enum class EvalStatus {
  ok,
  parse_error,        // not a well-formed expression
  unresolved_symbol,  // well-formed, but AUX was used with no value supplied
};

struct EvalResult {
  EvalStatus status = EvalStatus::parse_error;
  long long value = 0;   // meaningful only when status == ok
  bool used_aux = false; // AUX appeared and was resolved during evaluation
};

// Evaluates `expr`, resolving AUX to `aux_value` when one is supplied.
// Failure modes stay distinguishable: a string that does not parse reports
// parse_error; a parse-clean expression that needs AUX without a value
// reports unresolved_symbol.
EvalResult evaluate_expression(const std::string& expr,
                               std::optional<long long> aux_value);

// True when `expr` parses and mentions AUX.
bool references_aux(const std::string& expr);

}  // namespace magrpo
