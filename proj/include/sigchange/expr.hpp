#pragma once

// Closed-form scalar expressions: parser, evaluator, printer and exact
// symbolic differentiation.
//
// Grammar (standard infix, ^ right-associative):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: sin cos exp log sqrt abs sgn (one argument) and spow(e, c), the
// signed power with a constant exponent c.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigchange/errors.hpp"
#include "sigchange/signed_power.hpp"

namespace sigchange {

enum class Op : std::uint8_t {
  Const,
  Var,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Sin,
  Cos,
  Exp,
  Log,
  Sqrt,
  Abs,
  Sgn,
  // Sign function produced by differentiation: raises DomainError at 0
  // instead of returning a subgradient.
  StrictSgn,
  SPow,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Const;
  double value = 0.0;  // Const value, or the SPow exponent
  int index = -1;      // Var
  NodePtr lhs;
  NodePtr rhs;
};

using VariableList = std::shared_ptr<const std::vector<std::string>>;

namespace expr_detail {

inline NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

inline NodePtr make_var(int index) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->index = index;
  return n;
}

inline NodePtr make_node(Op op, NodePtr lhs, NodePtr rhs = nullptr,
                         double value = 0.0) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  n->value = value;
  return n;
}

inline bool is_const(const NodePtr& n, double v) {
  return n->op == Op::Const && n->value == v;
}

inline bool is_const(const NodePtr& n) { return n->op == Op::Const; }

// Smart constructors with light constant folding. Used by differentiation
// and programmatic builders, never by the parser (which must preserve the
// source tree for print/parse round trips).
inline NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (is_const(a) && is_const(b)) return make_const(a->value + b->value);
  return make_node(Op::Add, std::move(a), std::move(b));
}

inline NodePtr neg(NodePtr a) {
  if (is_const(a)) return make_const(-a->value);
  if (a->op == Op::Neg) return a->lhs;
  return make_node(Op::Neg, std::move(a));
}

inline NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return neg(std::move(b));
  if (is_const(a) && is_const(b)) return make_const(a->value - b->value);
  return make_node(Op::Sub, std::move(a), std::move(b));
}

inline NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (is_const(a) && is_const(b)) return make_const(a->value * b->value);
  if (is_const(a, -1.0)) return neg(std::move(b));
  if (is_const(b, -1.0)) return neg(std::move(a));
  return make_node(Op::Mul, std::move(a), std::move(b));
}

inline NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return make_const(0.0);
  if (is_const(b, 1.0)) return a;
  if (is_const(a) && is_const(b) && b->value != 0.0) {
    return make_const(a->value / b->value);
  }
  return make_node(Op::Div, std::move(a), std::move(b));
}

inline NodePtr pow_const(NodePtr a, double c) {
  if (c == 0.0) return make_const(1.0);
  if (c == 1.0) return a;
  if (is_const(a)) return make_const(std::pow(a->value, c));
  return make_node(Op::Pow, std::move(a), make_const(c));
}

inline NodePtr spow(NodePtr a, double c) {
  if (c == 1.0) return a;
  if (is_const(a)) return make_const(sigchange::spow(a->value, c));
  return make_node(Op::SPow, std::move(a), nullptr, c);
}

inline NodePtr unary(Op op, NodePtr a) {
  return make_node(op, std::move(a));
}

inline double check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string("non-finite result in ") + what);
  }
  return v;
}

inline double eval(const Node& n, std::span<const double> x) {
  switch (n.op) {
    case Op::Const:
      return n.value;
    case Op::Var:
      return x[static_cast<std::size_t>(n.index)];
    case Op::Neg:
      return -eval(*n.lhs, x);
    case Op::Add:
      return eval(*n.lhs, x) + eval(*n.rhs, x);
    case Op::Sub:
      return eval(*n.lhs, x) - eval(*n.rhs, x);
    case Op::Mul:
      return eval(*n.lhs, x) * eval(*n.rhs, x);
    case Op::Div: {
      const double d = eval(*n.rhs, x);
      if (d == 0.0) throw DomainError("division by zero");
      return eval(*n.lhs, x) / d;
    }
    case Op::Pow: {
      const double b = eval(*n.lhs, x);
      const double e = eval(*n.rhs, x);
      if (b == 0.0 && e < 0.0) throw DomainError("0 raised to negative power");
      return check_finite(std::pow(b, e), "^");
    }
    case Op::Sin:
      return std::sin(eval(*n.lhs, x));
    case Op::Cos:
      return std::cos(eval(*n.lhs, x));
    case Op::Exp:
      return check_finite(std::exp(eval(*n.lhs, x)), "exp");
    case Op::Log: {
      const double a = eval(*n.lhs, x);
      if (!(a > 0.0)) throw DomainError("log of non-positive argument");
      return std::log(a);
    }
    case Op::Sqrt: {
      const double a = eval(*n.lhs, x);
      if (a < 0.0) throw DomainError("sqrt of negative argument");
      return std::sqrt(a);
    }
    case Op::Abs:
      return std::fabs(eval(*n.lhs, x));
    case Op::Sgn:
      return eps(eval(*n.lhs, x));
    case Op::StrictSgn: {
      const double a = eval(*n.lhs, x);
      if (a == 0.0) {
        throw DomainError("derivative evaluated at a zero of abs/sgn/spow");
      }
      return eps(a);
    }
    case Op::SPow:
      return sigchange::spow(eval(*n.lhs, x), n.value);
  }
  throw EvaluationError("corrupt expression node");
}

inline bool references_variables(const Node& n) {
  if (n.op == Op::Var) return true;
  if (n.lhs && references_variables(*n.lhs)) return true;
  if (n.rhs && references_variables(*n.rhs)) return true;
  return false;
}

inline void collect_variables(const Node& n, std::set<int>& out) {
  if (n.op == Op::Var) out.insert(n.index);
  if (n.lhs) collect_variables(*n.lhs, out);
  if (n.rhs) collect_variables(*n.rhs, out);
}

inline bool equal(const Node& a, const Node& b) {
  if (a.op != b.op) return false;
  if (a.op == Op::Const || a.op == Op::SPow) {
    if (a.value != b.value) return false;
  }
  if (a.op == Op::Var) return a.index == b.index;
  if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
  if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
  if (a.lhs && !equal(*a.lhs, *b.lhs)) return false;
  if (a.rhs && !equal(*a.rhs, *b.rhs)) return false;
  return true;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    case Op::Sgn:
    case Op::StrictSgn: return "sgn";
    default: return "";
  }
}

inline void print(const Node& n, const std::vector<std::string>& vars,
                  std::string& out) {
  auto binary = [&](const char* sym) {
    out += '(';
    print(*n.lhs, vars, out);
    out += sym;
    print(*n.rhs, vars, out);
    out += ')';
  };
  switch (n.op) {
    case Op::Const:
      if (n.value < 0.0 || std::signbit(n.value)) {
        out += "(-" + format_number(-n.value) + ")";
      } else {
        out += format_number(n.value);
      }
      return;
    case Op::Var:
      out += vars[static_cast<std::size_t>(n.index)];
      return;
    case Op::Neg:
      out += "(-";
      print(*n.lhs, vars, out);
      out += ')';
      return;
    case Op::Add: binary(" + "); return;
    case Op::Sub: binary(" - "); return;
    case Op::Mul: binary("*"); return;
    case Op::Div: binary("/"); return;
    case Op::Pow: binary("^"); return;
    case Op::SPow:
      out += "spow(";
      print(*n.lhs, vars, out);
      out += ", " + format_number(n.value) + ")";
      return;
    default:
      out += function_name(n.op);
      out += '(';
      print(*n.lhs, vars, out);
      out += ')';
      return;
  }
}

// d(node)/d(var index)
inline NodePtr derivative(const NodePtr& n, int var) {
  switch (n->op) {
    case Op::Const:
      return make_const(0.0);
    case Op::Var:
      return make_const(n->index == var ? 1.0 : 0.0);
    case Op::Neg:
      return neg(derivative(n->lhs, var));
    case Op::Add:
      return add(derivative(n->lhs, var), derivative(n->rhs, var));
    case Op::Sub:
      return sub(derivative(n->lhs, var), derivative(n->rhs, var));
    case Op::Mul:
      return add(mul(derivative(n->lhs, var), n->rhs),
                 mul(n->lhs, derivative(n->rhs, var)));
    case Op::Div: {
      auto num = sub(mul(derivative(n->lhs, var), n->rhs),
                     mul(n->lhs, derivative(n->rhs, var)));
      return div(num, pow_const(n->rhs, 2.0));
    }
    case Op::Pow: {
      const auto& base = n->lhs;
      const auto& expo = n->rhs;
      const bool const_expo = !references_variables(*expo);
      if (const_expo) {
        const double c = eval(*expo, {});
        return mul(mul(make_const(c), pow_const(base, c - 1.0)),
                   derivative(base, var));
      }
      // a^b (b' log a + b a' / a)
      auto term1 = mul(derivative(expo, var), unary(Op::Log, base));
      auto term2 = div(mul(expo, derivative(base, var)), base);
      return mul(n, add(term1, term2));
    }
    case Op::Sin:
      return mul(unary(Op::Cos, n->lhs), derivative(n->lhs, var));
    case Op::Cos:
      return neg(mul(unary(Op::Sin, n->lhs), derivative(n->lhs, var)));
    case Op::Exp:
      return mul(n, derivative(n->lhs, var));
    case Op::Log:
      return div(derivative(n->lhs, var), n->lhs);
    case Op::Sqrt:
      return div(derivative(n->lhs, var), mul(make_const(2.0), n));
    case Op::Abs:
      return mul(unary(Op::StrictSgn, n->lhs), derivative(n->lhs, var));
    case Op::Sgn:
    case Op::StrictSgn:
      return make_const(0.0);
    case Op::SPow: {
      const double c = n->value;
      auto inner = derivative(n->lhs, var);
      if (c == 1.0) return inner;
      // c |u|^(c-1) u'  written as  c spow(u, c-1) sgn(u) u'
      auto factor = mul(make_const(c), spow(n->lhs, c - 1.0));
      return mul(mul(factor, unary(Op::StrictSgn, n->lhs)), inner);
    }
  }
  throw EvaluationError("corrupt expression node");
}

class Parser {
public:
  Parser(std::string_view src, const std::vector<std::string>& vars)
      : src_(src), vars_(vars) {}

  NodePtr parse() {
    skip_ws();
    auto n = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) {
      throw SyntaxError(pos_, {"operator", "end of input"},
                        "unexpected '" + std::string(1, src_[pos_]) + "'");
    }
    return n;
  }

private:
  void skip_ws() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      throw SyntaxError(pos_, {std::string(1, c)},
                        std::string("expected '") + c + "'");
    }
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_node(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_node(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_node(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_node(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_node(Op::Neg, parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    auto base = parse_primary();
    if (accept('^')) return make_node(Op::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) {
      throw SyntaxError(pos_, {"number", "name", "("},
                        "unexpected end of input");
    }
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      return parse_name();
    }
    throw SyntaxError(pos_, {"number", "name", "("},
                      "unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t n = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) throw SyntaxError(start, {"digit"}, "malformed number");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
        ++pos_;
      }
      if (digits() == 0) {
        throw SyntaxError(pos_, {"digit"}, "malformed exponent");
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    return make_const(std::strtod(text.c_str(), nullptr));
  }

  NodePtr parse_name() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(src_.substr(start, pos_ - start));
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      ++pos_;
      return parse_call(name, start);
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) return make_var(static_cast<int>(i));
    }
    throw UnknownVariable(name, start);
  }

  NodePtr parse_call(const std::string& name, std::size_t start) {
    static const std::map<std::string, Op> unary_functions = {
        {"sin", Op::Sin},   {"cos", Op::Cos}, {"exp", Op::Exp},
        {"log", Op::Log},   {"sqrt", Op::Sqrt}, {"abs", Op::Abs},
        {"sgn", Op::Sgn},
    };
    const bool is_spow = name == "spow";
    auto it = unary_functions.find(name);
    if (!is_spow && it == unary_functions.end()) {
      throw UnknownFunction(name, start);
    }
    std::vector<NodePtr> args;
    std::vector<std::size_t> offsets;
    skip_ws();
    offsets.push_back(pos_);
    args.push_back(parse_expr());
    while (accept(',')) {
      skip_ws();
      offsets.push_back(pos_);
      args.push_back(parse_expr());
    }
    expect(')');
    const std::size_t want = is_spow ? 2 : 1;
    if (args.size() != want) {
      throw ArityError(name + " expects " + std::to_string(want) +
                       " argument(s), got " + std::to_string(args.size()) +
                       " at offset " + std::to_string(start));
    }
    if (!is_spow) return make_node(it->second, args[0]);
    if (references_variables(*args[1])) {
      throw SyntaxError(offsets[1], {"constant exponent"},
                        "spow exponent must be constant");
    }
    const double c = eval(*args[1], {});
    if (c == 0.0) {
      throw SyntaxError(offsets[1], {"non-zero exponent"},
                        "spow exponent must be non-zero");
    }
    return make_node(Op::SPow, args[0], nullptr, c);
  }

  std::string_view src_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace expr_detail

/// Immutable expression over a fixed, ordered list of variable names.
/// Values are bound positionally (eval(span)) or by name (eval(map)).
class Expression {
public:
  Expression() : Expression(0.0, std::vector<std::string>{}) {}

  Expression(double constant, std::vector<std::string> variables)
      : vars_(std::make_shared<const std::vector<std::string>>(
            std::move(variables))),
        root_(expr_detail::make_const(constant)) {}

  Expression(NodePtr root, VariableList vars)
      : vars_(std::move(vars)), root_(std::move(root)) {}

  static Expression parse(std::string_view source,
                          std::vector<std::string> variables) {
    auto vars = std::make_shared<const std::vector<std::string>>(
        std::move(variables));
    expr_detail::Parser parser(source, *vars);
    return Expression(parser.parse(), vars);
  }

  static Expression constant(double v, const VariableList& vars) {
    return Expression(expr_detail::make_const(v), vars);
  }

  static Expression variable(std::string_view name, const VariableList& vars) {
    for (std::size_t i = 0; i < vars->size(); ++i) {
      if ((*vars)[i] == name) {
        return Expression(expr_detail::make_var(static_cast<int>(i)), vars);
      }
    }
    throw UnknownVariable(std::string(name), 0);
  }

  const std::vector<std::string>& variables() const noexcept { return *vars_; }
  const VariableList& variable_list() const noexcept { return vars_; }
  const NodePtr& root() const noexcept { return root_; }

  /// Positional evaluation; values[i] binds variables()[i].
  double eval(std::span<const double> values) const {
    if (values.size() < vars_->size()) {
      throw MissingBinding("expected " + std::to_string(vars_->size()) +
                           " values, got " + std::to_string(values.size()));
    }
    return expr_detail::eval(*root_, values);
  }

  double eval(const std::map<std::string, double>& env) const {
    std::set<int> used;
    expr_detail::collect_variables(*root_, used);
    std::vector<double> values(vars_->size(), std::nan(""));
    for (int i : used) {
      const auto& name = (*vars_)[static_cast<std::size_t>(i)];
      auto it = env.find(name);
      if (it == env.end()) throw MissingBinding("no value bound for " + name);
      values[static_cast<std::size_t>(i)] = it->second;
    }
    return expr_detail::eval(*root_, values);
  }

  Expression differentiate(std::string_view var) const {
    for (std::size_t i = 0; i < vars_->size(); ++i) {
      if ((*vars_)[i] == var) return differentiate(i);
    }
    // Not a declared variable: the expression cannot depend on it.
    return constant(0.0, vars_);
  }

  Expression differentiate(std::size_t index) const {
    return Expression(expr_detail::derivative(root_, static_cast<int>(index)),
                      vars_);
  }

  std::string to_string() const {
    std::string out;
    expr_detail::print(*root_, *vars_, out);
    return out;
  }

  bool is_constant() const {
    return !expr_detail::references_variables(*root_);
  }

  /// The literal value when the root node is a constant.
  std::optional<double> constant_value() const {
    if (root_->op == Op::Const) return root_->value;
    return std::nullopt;
  }

  /// Structural (AST) equality, including the variable list.
  friend bool operator==(const Expression& a, const Expression& b) {
    return *a.vars_ == *b.vars_ && expr_detail::equal(*a.root_, *b.root_);
  }

  friend Expression operator+(const Expression& a, const Expression& b) {
    return Expression(expr_detail::add(a.root_, b.root_), same_vars(a, b));
  }
  friend Expression operator-(const Expression& a, const Expression& b) {
    return Expression(expr_detail::sub(a.root_, b.root_), same_vars(a, b));
  }
  friend Expression operator*(const Expression& a, const Expression& b) {
    return Expression(expr_detail::mul(a.root_, b.root_), same_vars(a, b));
  }
  friend Expression operator/(const Expression& a, const Expression& b) {
    return Expression(expr_detail::div(a.root_, b.root_), same_vars(a, b));
  }
  friend Expression operator-(const Expression& a) {
    return Expression(expr_detail::neg(a.root_), a.vars_);
  }
  friend Expression operator*(double c, const Expression& a) {
    return Expression(expr_detail::mul(expr_detail::make_const(c), a.root_),
                      a.vars_);
  }
  friend Expression operator+(double c, const Expression& a) {
    return Expression(expr_detail::add(expr_detail::make_const(c), a.root_),
                      a.vars_);
  }

  friend Expression spow(const Expression& a, double c) {
    return Expression(expr_detail::spow(a.root_, c), a.vars_);
  }
  friend Expression pow(const Expression& a, double c) {
    return Expression(expr_detail::pow_const(a.root_, c), a.vars_);
  }
  friend Expression sin(const Expression& a) { return a.apply(Op::Sin); }
  friend Expression cos(const Expression& a) { return a.apply(Op::Cos); }
  friend Expression exp(const Expression& a) { return a.apply(Op::Exp); }
  friend Expression log(const Expression& a) { return a.apply(Op::Log); }
  friend Expression sqrt(const Expression& a) { return a.apply(Op::Sqrt); }
  friend Expression abs(const Expression& a) { return a.apply(Op::Abs); }

private:
  Expression apply(Op op) const {
    return Expression(expr_detail::unary(op, root_), vars_);
  }

  static const VariableList& same_vars(const Expression& a,
                                       const Expression& b) {
    if (a.vars_ != b.vars_ && *a.vars_ != *b.vars_) {
      throw EvaluationError("combining expressions over different variables");
    }
    return a.vars_;
  }

  VariableList vars_;
  NodePtr root_;
};

inline std::ostream& operator<<(std::ostream& os, const Expression& e) {
  return os << e.to_string();
}

/// Variable names x1..xm used for coordinates throughout the library.
inline std::vector<std::string> coordinate_names(std::size_t m) {
  std::vector<std::string> names;
  names.reserve(m);
  for (std::size_t i = 1; i <= m; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

}  // namespace sigchange
