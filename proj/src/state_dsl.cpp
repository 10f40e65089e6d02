#include "bistab/state_dsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "bistab/csv.hpp"
#include "bistab/error.hpp"

namespace bistab {

namespace {

StateExprPtr make(auto node) { return std::make_shared<const StateExpr>(StateExpr{std::move(node)}); }

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  StateExprPtr parse() {
    if (s_.size() > kMaxStateExprLength) {
      throw ParseError(ErrorCode::syntax_error, kMaxStateExprLength, {},
                       "expression longer than " + std::to_string(kMaxStateExprLength) + " bytes");
    }
    auto e = expr();
    skip_ws();
    if (pos_ < s_.size()) fail({"'+'", "'-'", "end of input"});
    return e;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  int depth_ = 0;

  [[noreturn]] void fail(std::vector<std::string> expected, std::string what = {}) const {
    if (what.empty()) {
      what = pos_ < s_.size() ? "unexpected '" + std::string(1, s_[pos_]) + "'" : "unexpected end of input";
    }
    throw ParseError(ErrorCode::syntax_error, std::min(pos_, s_.size()), std::move(expected), what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!accept(c)) fail({"'" + std::string(1, c) + "'"});
  }
  bool starts_number() {
    const char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return true;
    if (c != '+' && c != '-') return false;
    std::size_t k = pos_ + 1;
    while (k < s_.size() && std::isspace(static_cast<unsigned char>(s_[k]))) ++k;
    return k < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[k])) || s_[k] == '.');
  }

  struct Guard {
    Parser& p;
    explicit Guard(Parser& parser) : p(parser) {
      if (++p.depth_ > kMaxStateExprDepth) p.fail({}, "nesting deeper than " + std::to_string(kMaxStateExprDepth));
    }
    ~Guard() { --p.depth_; }
  };

  StateExprPtr expr() {
    Guard guard(*this);
    std::vector<StateExprPtr> terms;
    const bool negate_first = peek() == '-' && !starts_number() && accept('-');
    auto first = term();
    terms.push_back(negate_first ? negate(first) : first);
    for (;;) {
      const char op = peek();
      if (op != '+' && op != '-') break;
      ++pos_;
      auto t = term();
      terms.push_back(op == '-' ? negate(t) : t);
    }
    if (terms.size() == 1) return terms.front();
    return make(SumNode{std::move(terms)});
  }

  // "a - c*x" is the weighted term (-c)*x; "a - x" is (-1)*x.
  static StateExprPtr negate(const StateExprPtr& t) {
    if (const auto* sc = std::get_if<ScaleNode>(&t->node)) return make(ScaleNode{-sc->coeff, sc->expr});
    return make(ScaleNode{-1.0, t});
  }

  StateExprPtr term() {
    if (starts_number()) {
      const cplx c = complex();
      expect('*');
      return make(ScaleNode{c, atom()});
    }
    return atom();
  }

  StateExprPtr atom() {
    skip_ws();
    const std::size_t start = pos_;
    if (accept('(')) {
      auto e = expr();
      expect(')');
      return e;
    }
    std::string word;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) word += s_[pos_++];
    const std::vector<std::string> atoms{"'fock('", "'coh('", "'sq('", "'('", "a number"};
    if (word != "fock" && word != "coh" && word != "sq") {
      pos_ = start;
      fail(atoms);
    }
    expect('(');
    if (word == "fock") {
      skip_ws();
      const std::size_t at = pos_;
      const bool negative = accept('-');
      skip_ws();
      long n = 0;
      const std::size_t digits = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        n = std::min(n * 10 + (s_[pos_] - '0'), 1L << 30);
        ++pos_;
      }
      if (pos_ == digits) fail({"an integer"});
      if (negative) {
        throw ParseError(ErrorCode::semantic_error, at, {}, "Fock index must be non-negative");
      }
      expect(')');
      return make(FockNode{static_cast<int>(n)});
    }
    const cplx amp = complex();
    if (word == "coh") {
      expect(')');
      return make(CohNode{amp});
    }
    expect(',');
    const cplx squeeze = complex();
    expect(')');
    return make(SqNode{amp, squeeze});
  }

  double real() {
    skip_ws();
    const std::size_t start = pos_;
    double sign = 1.0;
    if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
      sign = s_[pos_] == '-' ? -1.0 : 1.0;
      ++pos_;
      skip_ws();
    }
    const std::size_t body = pos_;
    auto digits = [&] {
      const std::size_t from = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      return pos_ - from;
    };
    std::size_t mantissa = digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) {
      pos_ = start;
      fail({"a number"});
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail({"exponent digits"});
    }
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s_.data() + body, s_.data() + pos_, v);
    if (ec != std::errc{} || ptr != s_.data() + pos_ || !std::isfinite(v)) {
      pos_ = start;
      fail({}, "number out of range");
    }
    return sign * v;
  }

  bool accept_i() {
    if (pos_ < s_.size() && s_[pos_] == 'i') {
      ++pos_;
      return true;
    }
    return false;
  }

  cplx complex() {
    const double a = real();
    if (accept_i()) return {0.0, a};
    // A following signed number is the imaginary part only if it ends in 'i'.
    const std::size_t save = pos_;
    if (starts_number() && (peek() == '+' || peek() == '-')) {
      const double b = real();
      if (accept_i()) return {a, b};
    }
    pos_ = save;
    return {a, 0.0};
  }
};

std::string format_complex(cplx c) {
  const double re = c.real();
  const double im = c.imag();
  if (im == 0.0) return csv::format_double(re);
  const std::string imag = csv::format_double(im) + "i";
  if (re == 0.0) return imag;
  return csv::format_double(re) + (im < 0 ? "" : "+") + imag;
}

void print(const StateExpr& e, std::string& out);

void print_operand(const StateExpr& e, std::string& out) {
  const bool wrap = std::holds_alternative<SumNode>(e.node) || std::holds_alternative<ScaleNode>(e.node);
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

void print(const StateExpr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, FockNode>) {
          out += "fock(" + std::to_string(n.n) + ")";
        } else if constexpr (std::is_same_v<T, CohNode>) {
          out += "coh(" + format_complex(n.amp) + ")";
        } else if constexpr (std::is_same_v<T, SqNode>) {
          out += "sq(" + format_complex(n.amp) + ", " + format_complex(n.squeeze) + ")";
        } else if constexpr (std::is_same_v<T, ScaleNode>) {
          out += format_complex(n.coeff) + "*";
          print_operand(*n.expr, out);
        } else {
          for (std::size_t i = 0; i < n.terms.size(); ++i) {
            if (i) out += " + ";
            // A leading Sum would flatten on reparse.
            if (std::holds_alternative<SumNode>(n.terms[i]->node)) {
              print_operand(*n.terms[i], out);
            } else {
              print(*n.terms[i], out);
            }
          }
        }
      },
      e.node);
}

CVector eval_ket(const StateExpr& e, int cutoff) {
  return std::visit(
      [&](const auto& n) -> CVector {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, FockNode>) {
          return make_fock(n.n, cutoff).pure_ket();
        } else if constexpr (std::is_same_v<T, CohNode>) {
          return make_coherent(n.amp, cutoff).pure_ket();
        } else if constexpr (std::is_same_v<T, SqNode>) {
          return make_squeezed_coherent(n.amp, n.squeeze, cutoff).pure_ket();
        } else if constexpr (std::is_same_v<T, ScaleNode>) {
          return n.coeff * eval_ket(*n.expr, cutoff);
        } else {
          CVector sum = CVector::Zero(cutoff);
          for (const auto& t : n.terms) sum += eval_ket(*t, cutoff);
          return sum;
        }
      },
      e.node);
}

}  // namespace

StateExprPtr parse_state_expr(std::string_view text) { return Parser(text).parse(); }

std::string print_state_expr(const StateExpr& expr) {
  std::string out;
  print(expr, out);
  return out;
}

bool operator==(const StateExpr& a, const StateExpr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, FockNode>) {
          return x.n == y.n;
        } else if constexpr (std::is_same_v<T, CohNode>) {
          return x.amp == y.amp;
        } else if constexpr (std::is_same_v<T, SqNode>) {
          return x.amp == y.amp && x.squeeze == y.squeeze;
        } else if constexpr (std::is_same_v<T, ScaleNode>) {
          return x.coeff == y.coeff && *x.expr == *y.expr;
        } else {
          if (x.terms.size() != y.terms.size()) return false;
          for (std::size_t i = 0; i < x.terms.size(); ++i) {
            if (!(*x.terms[i] == *y.terms[i])) return false;
          }
          return true;
        }
      },
      a.node);
}

QuantumState eval_state_expr(const StateExpr& expr, int cutoff) {
  if (cutoff < 2) throw Error(ErrorCode::invalid_argument, "cutoff must be >= 2");
  CVector psi = eval_ket(expr, cutoff);
  if (!psi.allFinite() || psi.norm() < 1e-12) {
    throw Error(ErrorCode::degenerate_superposition, "state expression evaluates to the zero vector");
  }
  return QuantumState::from_ket(std::move(psi));
}

QuantumState state_from_expr(std::string_view text, int cutoff) {
  return eval_state_expr(*parse_state_expr(text), cutoff);
}

}  // namespace bistab
