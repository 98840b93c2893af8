#include "magrpo/expr.hpp"

#include <cctype>
#include <vector>

namespace magrpo {

namespace {

enum class Tok { number, aux, plus, star, end };

struct Token {
  Tok kind;
  long long value = 0;
};

bool tokenize(const std::string& expr, std::vector<Token>& out) {
  std::size_t i = 0;
  while (i < expr.size()) {
    char c = expr[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      long long v = 0;
      while (i < expr.size() && std::isdigit(static_cast<unsigned char>(expr[i]))) {
        v = v * 10 + (expr[i] - '0');
        ++i;
      }
      out.push_back({Tok::number, v});
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < expr.size() && std::isalpha(static_cast<unsigned char>(expr[j]))) ++j;
      if (expr.compare(i, j - i, "AUX") != 0) return false;
      out.push_back({Tok::aux});
      i = j;
    } else if (c == '+') {
      out.push_back({Tok::plus});
      ++i;
    } else if (c == '*') {
      out.push_back({Tok::star});
      ++i;
    } else {
      return false;
    }
  }
  out.push_back({Tok::end});
  return true;
}

// expr := term ('+' term)* ; term := factor ('*' factor)* ;
// factor := number | AUX
struct Parser {
  const std::vector<Token>& toks;
  std::size_t pos = 0;
  std::optional<long long> aux_value;
  bool used_aux = false;
  bool unresolved = false;
  bool bad = false;

  const Token& peek() const { return toks[pos]; }

  long long factor() {
    const Token& t = peek();
    if (t.kind == Tok::number) {
      ++pos;
      return t.value;
    }
    if (t.kind == Tok::aux) {
      ++pos;
      if (!aux_value) {
        unresolved = true;
        return 0;
      }
      used_aux = true;
      return *aux_value;
    }
    bad = true;
    return 0;
  }

  long long term() {
    long long v = factor();
    while (!bad && peek().kind == Tok::star) {
      ++pos;
      v *= factor();
    }
    return v;
  }

  long long expr() {
    long long v = term();
    while (!bad && peek().kind == Tok::plus) {
      ++pos;
      v += term();
    }
    return v;
  }
};

}  // namespace

EvalResult evaluate_expression(const std::string& expr,
                               std::optional<long long> aux_value) {
  std::vector<Token> toks;
  if (!tokenize(expr, toks)) return {EvalStatus::parse_error, 0, false};
  Parser p{toks, 0, aux_value};
  long long v = p.expr();
  if (p.bad || p.peek().kind != Tok::end) return {EvalStatus::parse_error, 0, false};
  if (p.unresolved) return {EvalStatus::unresolved_symbol, 0, false};
  return {EvalStatus::ok, v, p.used_aux};
}

bool references_aux(const std::string& expr) {
  // Evaluate with a dummy binding; any parse-clean expression that touches
  // AUX will report used_aux.
  EvalResult r = evaluate_expression(expr, 0);
  return r.status == EvalStatus::ok && r.used_aux;
}

}  // namespace magrpo
