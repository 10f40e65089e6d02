#pragma once

// Textual initial-state expressions, e.g. "sq(0, 0.5i) + sq(2+0.5i, 1)".
//
//   expr    := ['-'] term (('+' | '-') term)*
//   term    := [complex '*'] atom
//   atom    := 'fock(' int ')' | 'coh(' complex ')' | 'sq(' complex ',' complex ')' | '(' expr ')'
//   complex := real | real 'i' | real ('+' | '-') real 'i'     (real may carry a sign)
//
// '-' before a term is shorthand for a -1 weight. Whitespace is ignored.

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bistab/states.hpp"

namespace bistab {

struct StateExpr;
using StateExprPtr = std::shared_ptr<const StateExpr>;

struct FockNode {
  int n;
};
struct CohNode {
  cplx amp;
};
struct SqNode {
  cplx amp;
  cplx squeeze;
};
struct ScaleNode {
  cplx coeff;
  StateExprPtr expr;
};
struct SumNode {
  std::vector<StateExprPtr> terms;
};

struct StateExpr {
  std::variant<FockNode, CohNode, SqNode, ScaleNode, SumNode> node;
};

inline constexpr std::size_t kMaxStateExprLength = 4096;
inline constexpr int kMaxStateExprDepth = 200;

/// Throws ParseError: syntax-error with offset and expected tokens, or
/// semantic-error for a negative Fock index.
StateExprPtr parse_state_expr(std::string_view text);

/// Canonical form; parse(print(e)) is structurally equal to e.
std::string print_state_expr(const StateExpr& expr);

/// Structural equality with exact coefficient comparison.
bool operator==(const StateExpr& a, const StateExpr& b);

/// Weighted kets are summed unnormalized; only the final vector is
/// normalized. Throws degenerate-superposition when it vanishes.
QuantumState eval_state_expr(const StateExpr& expr, int cutoff = kDefaultCutoff);

/// parse + eval.
QuantumState state_from_expr(std::string_view text, int cutoff = kDefaultCutoff);

}  // namespace bistab
