#pragma once

// Symbolic expression trees for the Lagrangian DSL: parsing, rendering,
// differentiation, evaluation and a small sound simplifier.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace jacobivar {

enum class NodeKind { Constant, Symbol, Unary, Binary, Call };
enum class UnaryOp { Neg };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  NodeKind kind;
  double value = 0.0;            // Constant
  std::string name;              // Symbol or Call
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  std::vector<ExprPtr> args;     // children, arity fixed by kind
};

// Thrown on malformed DSL input; offset is the byte position in the source.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : std::runtime_error("syntax error at offset " + std::to_string(offset) +
                           ": " + what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Thrown by evaluate() on unbound symbols and numeric domain violations.
class EvalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline ExprPtr constant(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::Constant;
  e->value = v;
  return e;
}

inline ExprPtr symbol(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::Symbol;
  e->name = std::move(name);
  return e;
}

inline ExprPtr negate(ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::Unary;
  e->uop = UnaryOp::Neg;
  e->args = {std::move(a)};
  return e;
}

inline ExprPtr binary(BinaryOp op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::Binary;
  e->bop = op;
  e->args = {std::move(a), std::move(b)};
  return e;
}

inline ExprPtr add(ExprPtr a, ExprPtr b) { return binary(BinaryOp::Add, std::move(a), std::move(b)); }
inline ExprPtr sub(ExprPtr a, ExprPtr b) { return binary(BinaryOp::Sub, std::move(a), std::move(b)); }
inline ExprPtr mul(ExprPtr a, ExprPtr b) { return binary(BinaryOp::Mul, std::move(a), std::move(b)); }
inline ExprPtr div(ExprPtr a, ExprPtr b) { return binary(BinaryOp::Div, std::move(a), std::move(b)); }
inline ExprPtr pow(ExprPtr a, ExprPtr b) { return binary(BinaryOp::Pow, std::move(a), std::move(b)); }

inline ExprPtr call(std::string fn, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::Call;
  e->name = std::move(fn);
  e->args = {std::move(a)};
  return e;
}

// The complete function set of the DSL; unknown names are parse-time errors.
inline const std::map<std::string, double (*)(double)>& builtin_functions() {
  static const std::map<std::string, double (*)(double)> fns = {
      {"sin", [](double x) { return std::sin(x); }},
      {"cos", [](double x) { return std::cos(x); }},
      {"tan", [](double x) { return std::tan(x); }},
      {"exp", [](double x) { return std::exp(x); }},
      {"log", [](double x) { return std::log(x); }},
      {"sqrt", [](double x) { return std::sqrt(x); }},
  };
  return fns;
}

inline bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (a.get() == b.get()) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::Constant: return a->value == b->value;
    case NodeKind::Symbol: return a->name == b->name;
    case NodeKind::Unary:
      return a->uop == b->uop && equal(a->args[0], b->args[0]);
    case NodeKind::Binary:
      return a->bop == b->bop && equal(a->args[0], b->args[0]) &&
             equal(a->args[1], b->args[1]);
    case NodeKind::Call:
      return a->name == b->name && equal(a->args[0], b->args[0]);
  }
  return false;
}

inline bool is_const(const ExprPtr& e, double v) {
  return e->kind == NodeKind::Constant && e->value == v;
}

inline void collect_symbols(const ExprPtr& e, std::set<std::string>& out) {
  if (e->kind == NodeKind::Symbol) out.insert(e->name);
  for (const auto& a : e->args) collect_symbols(a, out);
}

inline std::set<std::string> symbols_of(const ExprPtr& e) {
  std::set<std::string> out;
  collect_symbols(e, out);
  return out;
}

inline bool contains_symbol(const ExprPtr& e, const std::string& name) {
  if (e->kind == NodeKind::Symbol) return e->name == name;
  for (const auto& a : e->args)
    if (contains_symbol(a, name)) return true;
  return false;
}

namespace detail {

// Shortest decimal form that scans back to the same double.
inline std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

enum TokenKind { kNumber, kIdent, kPlus, kMinus, kStar, kSlash, kCaret, kLParen, kRParen, kEnd };

struct Token {
  TokenKind kind;
  std::size_t offset;
  std::string text;
  double number = 0.0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    std::size_t at = pos_;
    if (pos_ >= src_.size()) return {kEnd, at, ""};
    char c = src_[pos_];
    switch (c) {
      case '+': ++pos_; return {kPlus, at, "+"};
      case '-': ++pos_; return {kMinus, at, "-"};
      case '*': ++pos_; return {kStar, at, "*"};
      case '/': ++pos_; return {kSlash, at, "/"};
      case '^': ++pos_; return {kCaret, at, "^"};
      case '(': ++pos_; return {kLParen, at, "("};
      case ')': ++pos_; return {kRParen, at, ")"};
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(at);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      return {kIdent, at, src_.substr(at, pos_ - at)};
    }
    throw ParseError(at, std::string("unexpected character '") + c + "'");
  }

 private:
  Token lex_number(std::size_t at) {
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = mark;  // 'e' belongs to a following identifier, not this literal
      }
    }
    Token t{kNumber, at, src_.substr(at, pos_ - at)};
    t.number = std::strtod(t.text.c_str(), nullptr);
    return t;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
};

// Recursive-descent parser for
//   expr   := term (('+'|'-') term)* ;
//   term   := factor (('*'|'/') factor)* ;
//   factor := '-' factor | power ;
//   power  := atom ('^' factor)? ;
//   atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')' ;
class Parser {
 public:
  explicit Parser(const std::string& src) : lexer_(src) { advance(); }

  ExprPtr parse_all() {
    ExprPtr e = parse_expr();
    if (tok_.kind != kEnd)
      throw ParseError(tok_.offset, "unexpected trailing input '" + tok_.text + "'");
    return e;
  }

 private:
  void advance() { tok_ = lexer_.next(); }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    while (tok_.kind == kPlus || tok_.kind == kMinus) {
      BinaryOp op = tok_.kind == kPlus ? BinaryOp::Add : BinaryOp::Sub;
      advance();
      e = binary(op, e, parse_term());
    }
    return e;
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    while (tok_.kind == kStar || tok_.kind == kSlash) {
      BinaryOp op = tok_.kind == kStar ? BinaryOp::Mul : BinaryOp::Div;
      advance();
      e = binary(op, e, parse_factor());
    }
    return e;
  }

  ExprPtr parse_factor() {
    if (tok_.kind == kMinus) {
      advance();
      return negate(parse_factor());
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_atom();
    if (tok_.kind == kCaret) {
      advance();
      return pow(base, parse_factor());
    }
    return base;
  }

  ExprPtr parse_atom() {
    switch (tok_.kind) {
      case kNumber: {
        double v = tok_.number;
        advance();
        return constant(v);
      }
      case kIdent: {
        std::string name = tok_.text;
        std::size_t at = tok_.offset;
        advance();
        if (tok_.kind == kLParen) {
          if (!builtin_functions().count(name))
            throw ParseError(at, "unknown function '" + name + "'");
          advance();
          ExprPtr arg = parse_expr();
          expect(kRParen, "')'");
          return call(name, arg);
        }
        return symbol(name);
      }
      case kLParen: {
        advance();
        ExprPtr e = parse_expr();
        expect(kRParen, "')'");
        return e;
      }
      default:
        throw ParseError(tok_.offset, "expected number, identifier, '-', or '('; found " +
                                          describe(tok_));
    }
  }

  void expect(TokenKind kind, const std::string& what) {
    if (tok_.kind != kind)
      throw ParseError(tok_.offset, "expected " + what + "; found " + describe(tok_));
    advance();
  }

  static std::string describe(const Token& t) {
    return t.kind == kEnd ? "end of input" : "'" + t.text + "'";
  }

  Lexer lexer_;
  Token tok_{kEnd, 0, ""};
};

// Operator precedence used by the renderer. Atoms sit above everything.
inline int precedence(const ExprPtr& e) {
  switch (e->kind) {
    case NodeKind::Constant: return e->value < 0 ? 3 : 6;
    case NodeKind::Symbol:
    case NodeKind::Call: return 6;
    case NodeKind::Unary: return 3;
    case NodeKind::Binary:
      switch (e->bop) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 2;
        case BinaryOp::Pow: return 4;
      }
  }
  return 6;
}

inline void render_into(const ExprPtr& e, std::string& out, int min_prec) {
  const int prec = precedence(e);
  const bool parens = prec < min_prec;
  if (parens) out += '(';
  switch (e->kind) {
    case NodeKind::Constant:
      if (e->value < 0) {
        out += '-';
        out += fmt_double(-e->value);
      } else {
        out += fmt_double(e->value);
      }
      break;
    case NodeKind::Symbol:
      out += e->name;
      break;
    case NodeKind::Unary:
      out += '-';
      render_into(e->args[0], out, 3);
      break;
    case NodeKind::Call:
      out += e->name;
      out += '(';
      render_into(e->args[0], out, 0);
      out += ')';
      break;
    case NodeKind::Binary:
      switch (e->bop) {
        case BinaryOp::Add:
          render_into(e->args[0], out, 1);
          out += " + ";
          render_into(e->args[1], out, 2);
          break;
        case BinaryOp::Sub:
          render_into(e->args[0], out, 1);
          out += " - ";
          render_into(e->args[1], out, 2);
          break;
        case BinaryOp::Mul:
          render_into(e->args[0], out, 2);
          out += '*';
          render_into(e->args[1], out, 3);
          break;
        case BinaryOp::Div:
          render_into(e->args[0], out, 2);
          out += '/';
          render_into(e->args[1], out, 3);
          break;
        case BinaryOp::Pow:
          render_into(e->args[0], out, 6);
          out += '^';
          render_into(e->args[1], out, 3);
          break;
      }
      break;
  }
  if (parens) out += ')';
}

}  // namespace detail

inline ExprPtr parse(const std::string& source) {
  return detail::Parser(source).parse_all();
}

// Infix form; re-parsing the result yields a tree equal to the input
// (up to negative constants, which read back as negated positives).
inline std::string render(const ExprPtr& e) {
  std::string out;
  detail::render_into(e, out, 0);
  return out;
}

inline double evaluate(const ExprPtr& e, const std::map<std::string, double>& bindings) {
  switch (e->kind) {
    case NodeKind::Constant:
      return e->value;
    case NodeKind::Symbol: {
      auto it = bindings.find(e->name);
      if (it == bindings.end()) throw EvalError("unbound symbol '" + e->name + "'");
      return it->second;
    }
    case NodeKind::Unary:
      return -evaluate(e->args[0], bindings);
    case NodeKind::Binary: {
      double a = evaluate(e->args[0], bindings);
      double b = evaluate(e->args[1], bindings);
      switch (e->bop) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div:
          if (b == 0.0) throw EvalError("division by zero in '" + render(e) + "'");
          return a / b;
        case BinaryOp::Pow: {
          double r = std::pow(a, b);
          if (!std::isfinite(r) && std::isfinite(a) && std::isfinite(b))
            throw EvalError("domain error in '" + render(e) + "'");
          return r;
        }
      }
      return 0.0;
    }
    case NodeKind::Call: {
      double a = evaluate(e->args[0], bindings);
      if (e->name == "log" && a <= 0.0)
        throw EvalError("log of non-positive value (" + detail::fmt_double(a) + ") in '" +
                        render(e) + "'");
      if (e->name == "sqrt" && a < 0.0)
        throw EvalError("sqrt of negative value (" + detail::fmt_double(a) + ") in '" +
                        render(e) + "'");
      return builtin_functions().at(e->name)(a);
    }
  }
  return 0.0;
}

inline ExprPtr substitute(const ExprPtr& e, const std::string& name, const ExprPtr& repl) {
  switch (e->kind) {
    case NodeKind::Constant: return e;
    case NodeKind::Symbol: return e->name == name ? repl : e;
    case NodeKind::Unary: return negate(substitute(e->args[0], name, repl));
    case NodeKind::Binary:
      return binary(e->bop, substitute(e->args[0], name, repl),
                    substitute(e->args[1], name, repl));
    case NodeKind::Call: return call(e->name, substitute(e->args[0], name, repl));
  }
  return e;
}

namespace detail {

inline bool fold_call(const std::string& fn, double x, double& out) {
  if (fn == "log" && x <= 0.0) return false;
  if (fn == "sqrt" && x < 0.0) return false;
  double r = builtin_functions().at(fn)(x);
  if (!std::isfinite(r)) return false;
  out = r;
  return true;
}

inline bool fold_binary(BinaryOp op, double a, double b, double& out) {
  double r = 0.0;
  switch (op) {
    case BinaryOp::Add: r = a + b; break;
    case BinaryOp::Sub: r = a - b; break;
    case BinaryOp::Mul: r = a * b; break;
    case BinaryOp::Div:
      if (b == 0.0) return false;
      r = a / b;
      break;
    case BinaryOp::Pow: r = std::pow(a, b); break;
  }
  if (!std::isfinite(r)) return false;
  out = r;
  return true;
}

inline void flatten_product(const ExprPtr& e, double& coeff, std::vector<ExprPtr>& factors);

// Splits an additive chain into signed terms, and a term into
// (numeric coefficient, non-constant core). Core is null for pure constants.
struct Term {
  double coeff;
  ExprPtr core;
};

inline void flatten_sum(const ExprPtr& e, double sign, std::vector<Term>& out) {
  if (e->kind == NodeKind::Binary && e->bop == BinaryOp::Add) {
    flatten_sum(e->args[0], sign, out);
    flatten_sum(e->args[1], sign, out);
    return;
  }
  if (e->kind == NodeKind::Binary && e->bop == BinaryOp::Sub) {
    flatten_sum(e->args[0], sign, out);
    flatten_sum(e->args[1], -sign, out);
    return;
  }
  double coeff = sign;
  std::vector<ExprPtr> factors;
  flatten_product(e, coeff, factors);
  if (factors.empty()) {
    out.push_back({coeff, nullptr});
    return;
  }
  ExprPtr core;
  for (const auto& f : factors) core = core ? mul(core, f) : f;
  out.push_back({coeff, core});
}

// Left-leaning product with the numeric coefficient first, so chains render
// without parentheses: 2*q1*cos(q1^2).
inline ExprPtr make_product(double coeff, const std::vector<ExprPtr>& factors) {
  if (coeff == 0.0 || factors.empty()) return constant(coeff);
  ExprPtr acc;
  if (coeff != 1.0 && coeff != -1.0) acc = constant(coeff);
  for (const auto& f : factors) acc = acc ? mul(acc, f) : f;
  return coeff == -1.0 ? negate(acc) : acc;
}

inline void flatten_product(const ExprPtr& e, double& coeff, std::vector<ExprPtr>& factors);

inline ExprPtr term_expr(double coeff, const ExprPtr& core) {
  double c2 = coeff;
  std::vector<ExprPtr> factors;
  flatten_product(core, c2, factors);
  return make_product(c2, factors);
}

// Like-term collection at one chain level: q1 + q1 -> 2*q1, a - a -> 0.
// Returns null when nothing merges, so untouched chains keep their shape.
inline ExprPtr collect_sum(const ExprPtr& e) {
  std::vector<Term> terms;
  flatten_sum(e, 1.0, terms);
  std::vector<Term> grouped;
  double const_sum = 0.0;
  int const_count = 0;
  bool merged = false;
  for (const auto& t : terms) {
    if (!t.core) {
      const_sum += t.coeff;
      if (++const_count > 1) merged = true;
      continue;
    }
    bool found = false;
    for (auto& g : grouped) {
      if (equal(g.core, t.core)) {
        g.coeff += t.coeff;
        found = merged = true;
        break;
      }
    }
    if (!found) grouped.push_back(t);
  }
  if (!merged) return nullptr;

  ExprPtr acc;
  for (const auto& g : grouped) {
    if (g.coeff == 0.0) continue;
    if (!acc) {
      acc = term_expr(g.coeff, g.core);
    } else if (g.coeff < 0.0) {
      acc = sub(acc, term_expr(-g.coeff, g.core));
    } else {
      acc = add(acc, term_expr(g.coeff, g.core));
    }
  }
  if (const_sum != 0.0 || !acc) {
    if (!acc) return constant(const_sum);
    acc = const_sum < 0.0 ? sub(acc, constant(-const_sum)) : add(acc, constant(const_sum));
  }
  return acc;
}

// Gathers numeric factors across a multiplicative chain: 0.5*(w^2*(2*q1))
// becomes w^2*q1.
inline void flatten_product(const ExprPtr& e, double& coeff, std::vector<ExprPtr>& factors) {
  if (e->kind == NodeKind::Binary && e->bop == BinaryOp::Mul) {
    flatten_product(e->args[0], coeff, factors);
    flatten_product(e->args[1], coeff, factors);
    return;
  }
  if (e->kind == NodeKind::Unary) {
    coeff = -coeff;
    flatten_product(e->args[0], coeff, factors);
    return;
  }
  if (e->kind == NodeKind::Constant) {
    coeff *= e->value;
    return;
  }
  factors.push_back(e);
}

inline ExprPtr collect_product(const ExprPtr& e) {
  double coeff = 1.0;
  std::vector<ExprPtr> factors;
  flatten_product(e, coeff, factors);
  if (!std::isfinite(coeff)) return nullptr;
  ExprPtr acc = make_product(coeff, factors);
  return equal(acc, e) ? nullptr : acc;
}

inline ExprPtr rewrite_once(const ExprPtr& e);

inline ExprPtr simplify_node(ExprPtr e) {
  for (int guard = 0; guard < 64; ++guard) {
    ExprPtr next = rewrite_once(e);
    if (!next) return e;
    e = next;
  }
  return e;
}

// One local rewrite from the safe rule set; null means no rule applies.
inline ExprPtr rewrite_once(const ExprPtr& e) {
  switch (e->kind) {
    case NodeKind::Constant:
    case NodeKind::Symbol:
      return nullptr;
    case NodeKind::Unary: {
      const ExprPtr& u = e->args[0];
      if (u->kind == NodeKind::Constant) return constant(-u->value);
      if (u->kind == NodeKind::Unary) return u->args[0];
      return nullptr;
    }
    case NodeKind::Call: {
      const ExprPtr& u = e->args[0];
      double v = 0.0;
      if (u->kind == NodeKind::Constant && fold_call(e->name, u->value, v)) return constant(v);
      return nullptr;
    }
    case NodeKind::Binary:
      break;
  }
  const ExprPtr& a = e->args[0];
  const ExprPtr& b = e->args[1];
  const bool ca = a->kind == NodeKind::Constant;
  const bool cb = b->kind == NodeKind::Constant;
  if (ca && cb) {
    double v = 0.0;
    if (fold_binary(e->bop, a->value, b->value, v)) return constant(v);
  }
  switch (e->bop) {
    case BinaryOp::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      if (b->kind == NodeKind::Unary) return sub(a, b->args[0]);
      return collect_sum(e);
    case BinaryOp::Sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return negate(b);
      if (equal(a, b)) return constant(0.0);
      if (b->kind == NodeKind::Unary) return add(a, b->args[0]);
      return collect_sum(e);
    case BinaryOp::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      if (equal(a, b)) return pow(a, constant(2.0));
      return collect_product(e);
    case BinaryOp::Div:
      if (is_const(b, 1.0)) return a;
      if (is_const(a, 0.0)) return constant(0.0);
      if (cb && b->value != 0.0 && std::isfinite(1.0 / b->value))
        return mul(constant(1.0 / b->value), a);
      return nullptr;
    case BinaryOp::Pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return constant(1.0);
      return nullptr;
  }
  return nullptr;
}

inline ExprPtr simplify_rec(const ExprPtr& e) {
  ExprPtr n = e;
  if (!e->args.empty()) {
    std::vector<ExprPtr> kids;
    kids.reserve(e->args.size());
    bool changed = false;
    for (const auto& a : e->args) {
      kids.push_back(simplify_rec(a));
      changed |= kids.back().get() != a.get();
    }
    if (changed) {
      auto copy = std::make_shared<Expr>(*e);
      copy->args = std::move(kids);
      n = copy;
    }
  }
  return simplify_node(n);
}

}  // namespace detail

// Safe rewrite set only: constant folding, 0/1 identities and annihilators,
// one-level like-term collection, x^1 -> x. Semantics-preserving under
// evaluate() at every binding.
inline ExprPtr simplify(const ExprPtr& e) { return detail::simplify_rec(e); }

namespace detail {

inline ExprPtr diff(const ExprPtr& e, const std::string& x) {
  switch (e->kind) {
    case NodeKind::Constant:
      return constant(0.0);
    case NodeKind::Symbol:
      return constant(e->name == x ? 1.0 : 0.0);
    case NodeKind::Unary:
      return negate(diff(e->args[0], x));
    case NodeKind::Binary: {
      const ExprPtr& u = e->args[0];
      const ExprPtr& v = e->args[1];
      switch (e->bop) {
        case BinaryOp::Add: return add(diff(u, x), diff(v, x));
        case BinaryOp::Sub: return sub(diff(u, x), diff(v, x));
        case BinaryOp::Mul: return add(mul(diff(u, x), v), mul(u, diff(v, x)));
        case BinaryOp::Div:
          return div(sub(mul(diff(u, x), v), mul(u, diff(v, x))), pow(v, constant(2.0)));
        case BinaryOp::Pow:
          if (v->kind == NodeKind::Constant) {
            // c * u^(c-1) * u'
            return mul(mul(v, pow(u, constant(v->value - 1.0))), diff(u, x));
          }
          // u^v * (v' log u + v u'/u)
          return mul(pow(u, v),
                     add(mul(diff(v, x), call("log", u)), div(mul(v, diff(u, x)), u)));
      }
      return constant(0.0);
    }
    case NodeKind::Call: {
      const ExprPtr& u = e->args[0];
      ExprPtr du = diff(u, x);
      if (e->name == "sin") return mul(du, call("cos", u));
      if (e->name == "cos") return negate(mul(du, call("sin", u)));
      if (e->name == "tan") return div(du, pow(call("cos", u), constant(2.0)));
      if (e->name == "exp") return mul(du, call("exp", u));
      if (e->name == "log") return div(du, u);
      if (e->name == "sqrt") return div(du, mul(constant(2.0), call("sqrt", u)));
      throw EvalError("no derivative rule for function '" + e->name + "'");
    }
  }
  return constant(0.0);
}

}  // namespace detail

// Exact symbolic partial derivative, simplified.
inline ExprPtr differentiate(const ExprPtr& e, const std::string& wrt) {
  return simplify(detail::diff(e, wrt));
}

}  // namespace jacobivar
