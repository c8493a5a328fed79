#include "imech/expression.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <system_error>

namespace imech {

ExpressionError::ExpressionError(const std::string& message, std::size_t begin, std::size_t end)
    : Error(message + " (at byte " + std::to_string(begin) + ")"), begin_(begin), end_(end) {}

namespace detail {

enum class NodeKind { number, identifier, variable, negate, add, subtract, multiply, divide, power, call };
enum class Function { sin, cos, tan, sqrt, abs, min, max };

struct Node {
  NodeKind kind = NodeKind::number;
  double value = 0.0;
  std::size_t slot = 0;
  std::string name;
  Function function = Function::sin;
  std::vector<int> children;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ExpressionTree {
  std::vector<Node> nodes;
  int root = -1;
  std::string source;
};

}  // namespace detail

namespace {

using detail::ExpressionTree;
using detail::Function;
using detail::Node;
using detail::NodeKind;

struct FunctionInfo {
  std::string_view name;
  Function function;
  std::size_t arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"sin", Function::sin, 1},   {"cos", Function::cos, 1}, {"tan", Function::tan, 1},
    {"sqrt", Function::sqrt, 1}, {"abs", Function::abs, 1}, {"min", Function::min, 2},
    {"max", Function::max, 2},
};

const FunctionInfo* find_function(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string_view function_name(Function f) {
  for (const auto& info : kFunctions) {
    if (info.function == f) return info.name;
  }
  return "?";
}

enum class TokenKind { number, identifier, plus, minus, star, slash, caret, lparen, rparen, comma, end };

struct Token {
  TokenKind kind;
  std::size_t begin;
  std::size_t end;
  double number = 0.0;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) { advance(); }

  ExpressionTree parse() {
    tree_.source = std::string(src_);
    tree_.root = parse_expr();
    if (tok_.kind != TokenKind::end) fail("unexpected token '" + text(tok_) + "'", tok_);
    return std::move(tree_);
  }

 private:
  std::string text(const Token& t) const { return std::string(src_.substr(t.begin, t.end - t.begin)); }

  [[noreturn]] void fail(const std::string& msg, const Token& t) const {
    throw ExpressionError(msg, t.begin, std::max(t.end, t.begin + 1));
  }

  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    Token t{TokenKind::end, pos_, pos_};
    if (pos_ >= src_.size()) {
      tok_ = t;
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t p = pos_;
      while (p < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[p])) || src_[p] == '.')) ++p;
      if (p < src_.size() && (src_[p] == 'e' || src_[p] == 'E')) {
        std::size_t q = p + 1;
        if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
        if (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) {
          while (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) ++q;
          p = q;
        }
      }
      double value = 0.0;
      const char* first = src_.data() + pos_;
      const char* last = src_.data() + p;
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc() || ptr != last) {
        throw ExpressionError("malformed number '" + std::string(first, last) + "'", pos_, p);
      }
      t = Token{TokenKind::number, pos_, p, value};
      pos_ = p;
      tok_ = t;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t p = pos_;
      while (p < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[p])) || src_[p] == '_')) ++p;
      tok_ = Token{TokenKind::identifier, pos_, p};
      pos_ = p;
      return;
    }
    TokenKind kind;
    switch (c) {
      case '+': kind = TokenKind::plus; break;
      case '-': kind = TokenKind::minus; break;
      case '*': kind = TokenKind::star; break;
      case '/': kind = TokenKind::slash; break;
      case '^': kind = TokenKind::caret; break;
      case '(': kind = TokenKind::lparen; break;
      case ')': kind = TokenKind::rparen; break;
      case ',': kind = TokenKind::comma; break;
      default:
        throw ExpressionError(std::string("unexpected character '") + c + "'", pos_, pos_ + 1);
    }
    tok_ = Token{kind, pos_, pos_ + 1};
    ++pos_;
  }

  int add(Node n) {
    tree_.nodes.push_back(std::move(n));
    return static_cast<int>(tree_.nodes.size() - 1);
  }

  int binary(NodeKind kind, int lhs, int rhs) {
    Node n;
    n.kind = kind;
    n.children = {lhs, rhs};
    n.begin = tree_.nodes[lhs].begin;
    n.end = tree_.nodes[rhs].end;
    return add(std::move(n));
  }

  int parse_expr() {
    int lhs = parse_term();
    while (tok_.kind == TokenKind::plus || tok_.kind == TokenKind::minus) {
      const NodeKind kind = tok_.kind == TokenKind::plus ? NodeKind::add : NodeKind::subtract;
      advance();
      lhs = binary(kind, lhs, parse_term());
    }
    return lhs;
  }

  int parse_term() {
    int lhs = parse_unary();
    while (tok_.kind == TokenKind::star || tok_.kind == TokenKind::slash) {
      const NodeKind kind = tok_.kind == TokenKind::star ? NodeKind::multiply : NodeKind::divide;
      advance();
      lhs = binary(kind, lhs, parse_unary());
    }
    return lhs;
  }

  int parse_unary() {
    if (tok_.kind == TokenKind::minus) {
      const std::size_t begin = tok_.begin;
      advance();
      const int operand = parse_unary();
      Node n;
      n.kind = NodeKind::negate;
      n.children = {operand};
      n.begin = begin;
      n.end = tree_.nodes[operand].end;
      return add(std::move(n));
    }
    return parse_power();
  }

  int parse_power() {
    const int base = parse_primary();
    if (tok_.kind == TokenKind::caret) {
      advance();
      return binary(NodeKind::power, base, parse_unary());
    }
    return base;
  }

  int parse_primary() {
    const Token t = tok_;
    switch (t.kind) {
      case TokenKind::number: {
        advance();
        Node n;
        n.kind = NodeKind::number;
        n.value = t.number;
        n.begin = t.begin;
        n.end = t.end;
        return add(std::move(n));
      }
      case TokenKind::identifier: {
        advance();
        const std::string name = text(t);
        if (tok_.kind != TokenKind::lparen) {
          if (find_function(name)) fail("function '" + name + "' used without arguments", t);
          Node n;
          n.kind = NodeKind::identifier;
          n.name = name;
          n.begin = t.begin;
          n.end = t.end;
          return add(std::move(n));
        }
        const FunctionInfo* info = find_function(name);
        if (!info) fail("unknown function '" + name + "'", t);
        advance();
        std::vector<int> args{parse_expr()};
        while (tok_.kind == TokenKind::comma) {
          advance();
          args.push_back(parse_expr());
        }
        if (tok_.kind != TokenKind::rparen) fail("expected ')' to close call of '" + name + "'", tok_);
        const std::size_t end = tok_.end;
        advance();
        if (args.size() != info->arity) {
          throw ExpressionError("function '" + name + "' expects " + std::to_string(info->arity) +
                                    " argument(s), got " + std::to_string(args.size()),
                                t.begin, end);
        }
        Node n;
        n.kind = NodeKind::call;
        n.function = info->function;
        n.name = name;
        n.children = std::move(args);
        n.begin = t.begin;
        n.end = end;
        return add(std::move(n));
      }
      case TokenKind::lparen: {
        advance();
        const int inner = parse_expr();
        if (tok_.kind != TokenKind::rparen) fail("expected ')'", tok_);
        advance();
        return inner;
      }
      case TokenKind::end:
        fail("unexpected end of expression", t);
      default:
        fail("unexpected token '" + text(t) + "'", t);
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_{TokenKind::end, 0, 0};
  ExpressionTree tree_;
};

// Forward-mode dual number.
struct Dual {
  double v;
  double d;
};

template <typename T>
struct Arith;

template <>
struct Arith<double> {
  static double constant(double c) { return c; }
  static double value(double x) { return x; }
  static double add(double a, double b) { return a + b; }
  static double sub(double a, double b) { return a - b; }
  static double mul(double a, double b) { return a * b; }
  static double div(double a, double b) { return a / b; }
  static double neg(double a) { return -a; }
  static double pow(double a, double b) { return std::pow(a, b); }
  static double sin(double a) { return std::sin(a); }
  static double cos(double a) { return std::cos(a); }
  static double tan(double a) { return std::tan(a); }
  static double sqrt(double a) { return std::sqrt(a); }
  static double abs(double a) { return std::abs(a); }
  static double min(double a, double b) { return std::min(a, b); }
  static double max(double a, double b) { return std::max(a, b); }
};

template <>
struct Arith<Dual> {
  static Dual constant(double c) { return {c, 0.0}; }
  static double value(Dual x) { return x.v; }
  static Dual add(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
  static Dual sub(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
  static Dual mul(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
  static Dual div(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
  static Dual neg(Dual a) { return {-a.v, -a.d}; }
  static Dual pow(Dual a, Dual b) {
    const double v = std::pow(a.v, b.v);
    double d = 0.0;
    if (a.d != 0.0) d += b.v * std::pow(a.v, b.v - 1.0) * a.d;
    if (b.d != 0.0) d += v * std::log(a.v) * b.d;
    return {v, d};
  }
  static Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
  static Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
  static Dual tan(Dual a) {
    const double c = std::cos(a.v);
    return {std::tan(a.v), a.d / (c * c)};
  }
  static Dual sqrt(Dual a) {
    const double s = std::sqrt(a.v);
    return {s, a.d == 0.0 ? 0.0 : a.d / (2.0 * s)};
  }
  static Dual abs(Dual a) { return a.v < 0.0 ? neg(a) : (a.v > 0.0 ? a : Dual{0.0, 0.0}); }
  static Dual min(Dual a, Dual b) { return b.v < a.v ? b : a; }
  static Dual max(Dual a, Dual b) { return b.v > a.v ? b : a; }
};

template <typename T>
class Evaluator {
 public:
  Evaluator(const ExpressionTree& tree, std::span<const double> vars, std::size_t seed)
      : tree_(tree), vars_(vars), seed_(seed) {}

  T eval(int index) const {
    using A = Arith<T>;
    const Node& n = tree_.nodes[index];
    switch (n.kind) {
      case NodeKind::number:
        return A::constant(n.value);
      case NodeKind::variable: {
        if (n.slot >= vars_.size()) {
          throw ExpressionError("variable '" + n.name + "' has no value", n.begin, n.end);
        }
        if constexpr (std::is_same_v<T, Dual>) {
          return Dual{vars_[n.slot], n.slot == seed_ ? 1.0 : 0.0};
        } else {
          return vars_[n.slot];
        }
      }
      case NodeKind::identifier:
        throw ExpressionError("unbound identifier '" + n.name + "'", n.begin, n.end);
      case NodeKind::negate:
        return A::neg(eval(n.children[0]));
      case NodeKind::add:
        return A::add(eval(n.children[0]), eval(n.children[1]));
      case NodeKind::subtract:
        return A::sub(eval(n.children[0]), eval(n.children[1]));
      case NodeKind::multiply:
        return A::mul(eval(n.children[0]), eval(n.children[1]));
      case NodeKind::divide: {
        const T num = eval(n.children[0]);
        const T den = eval(n.children[1]);
        if (A::value(den) == 0.0) throw ExpressionError("division by zero", n.begin, n.end);
        return A::div(num, den);
      }
      case NodeKind::power: {
        const T base = eval(n.children[0]);
        const T exponent = eval(n.children[1]);
        const double b = A::value(base);
        const double e = A::value(exponent);
        if (b < 0.0 && e != std::trunc(e)) {
          throw ExpressionError("negative base raised to a non-integer power", n.begin, n.end);
        }
        if (b == 0.0 && e < 0.0) throw ExpressionError("division by zero", n.begin, n.end);
        return A::pow(base, exponent);
      }
      case NodeKind::call: {
        const T a = eval(n.children[0]);
        switch (n.function) {
          case Function::sin: return A::sin(a);
          case Function::cos: return A::cos(a);
          case Function::tan: return A::tan(a);
          case Function::sqrt:
            if (A::value(a) < 0.0) throw ExpressionError("sqrt of a negative number", n.begin, n.end);
            return A::sqrt(a);
          case Function::abs: return A::abs(a);
          case Function::min: return A::min(a, eval(n.children[1]));
          case Function::max: return A::max(a, eval(n.children[1]));
        }
      }
    }
    return A::constant(0.0);
  }

 private:
  const ExpressionTree& tree_;
  std::span<const double> vars_;
  std::size_t seed_;
};

// Precedence used by the canonical printer.
int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::add:
    case NodeKind::subtract: return 1;
    case NodeKind::multiply:
    case NodeKind::divide: return 2;
    case NodeKind::negate: return 3;
    case NodeKind::power: return 4;
    case NodeKind::number:
      // Non-finite or negative literals only come from Expression::constant.
      return (std::isfinite(n.value) && !std::signbit(n.value)) ? 5 : 3;
    default: return 5;
  }
}

std::string format_number(double v) {
  if (std::isnan(v)) return "(0/0)";
  if (std::isinf(v)) return v > 0 ? "(1/0)" : "-(1/0)";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

void print(const ExpressionTree& tree, int index, std::string& out) {
  const Node& n = tree.nodes[index];
  auto child = [&](int c, bool parens) {
    if (parens) out += '(';
    print(tree, c, out);
    if (parens) out += ')';
  };
  switch (n.kind) {
    case NodeKind::number:
      out += format_number(n.value);
      return;
    case NodeKind::identifier:
    case NodeKind::variable:
      out += n.name;
      return;
    case NodeKind::negate:
      out += '-';
      child(n.children[0], precedence(tree.nodes[n.children[0]]) < 3);
      return;
    case NodeKind::add:
    case NodeKind::subtract: {
      child(n.children[0], precedence(tree.nodes[n.children[0]]) < 1);
      out += n.kind == NodeKind::add ? " + " : " - ";
      child(n.children[1], precedence(tree.nodes[n.children[1]]) <= 1);
      return;
    }
    case NodeKind::multiply:
    case NodeKind::divide: {
      child(n.children[0], precedence(tree.nodes[n.children[0]]) < 2);
      out += n.kind == NodeKind::multiply ? "*" : "/";
      child(n.children[1], precedence(tree.nodes[n.children[1]]) <= 2);
      return;
    }
    case NodeKind::power: {
      child(n.children[0], precedence(tree.nodes[n.children[0]]) < 5);
      out += '^';
      child(n.children[1], precedence(tree.nodes[n.children[1]]) < 3);
      return;
    }
    case NodeKind::call: {
      out += function_name(n.function);
      out += '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ", ";
        print(tree, n.children[i], out);
      }
      out += ')';
      return;
    }
  }
}

}  // namespace

void SymbolTable::add_variable(const std::string& name, std::size_t slot) { symbols_[name] = slot; }

void SymbolTable::add_constant(const std::string& name, double value) { symbols_[name] = value; }

bool SymbolTable::contains(const std::string& name) const { return symbols_.count(name) > 0; }

const std::variant<std::size_t, double>* SymbolTable::find(const std::string& name) const {
  auto it = symbols_.find(name);
  return it == symbols_.end() ? nullptr : &it->second;
}

Expression Expression::parse(std::string_view source) {
  Parser parser(source);
  Expression e;
  e.tree_ = std::make_shared<const ExpressionTree>(parser.parse());
  e.source_ = std::string(source);
  return e;
}

Expression Expression::constant(double value) {
  ExpressionTree tree;
  Node n;
  n.kind = NodeKind::number;
  n.value = value;
  tree.nodes.push_back(n);
  tree.root = 0;
  Expression e;
  std::string text;
  print(tree, 0, text);
  tree.source = text;
  e.tree_ = std::make_shared<const ExpressionTree>(std::move(tree));
  e.source_ = text;
  return e;
}

std::string Expression::canonical() const {
  std::string out;
  if (tree_) print(*tree_, tree_->root, out);
  return out;
}

std::vector<std::string> Expression::identifiers() const {
  std::set<std::string> names;
  if (tree_) {
    for (const auto& n : tree_->nodes) {
      if (n.kind == NodeKind::identifier) names.insert(n.name);
    }
  }
  return {names.begin(), names.end()};
}

BoundExpression Expression::bind(const SymbolTable& symbols) const {
  ExpressionTree bound = *tree_;
  // Report the left-most unknown identifier.
  const Node* unknown = nullptr;
  for (auto& n : bound.nodes) {
    if (n.kind != NodeKind::identifier) continue;
    const auto* entry = symbols.find(n.name);
    if (!entry && n.name == "pi") {
      n.kind = NodeKind::number;
      n.value = std::numbers::pi;
      continue;
    }
    if (!entry) {
      if (!unknown || n.begin < unknown->begin) unknown = &n;
      continue;
    }
    if (const auto* slot = std::get_if<std::size_t>(entry)) {
      n.kind = NodeKind::variable;
      n.slot = *slot;
    } else {
      n.kind = NodeKind::number;
      n.value = std::get<double>(*entry);
    }
  }
  if (unknown) {
    throw ExpressionError("unknown identifier '" + unknown->name + "'", unknown->begin, unknown->end);
  }
  BoundExpression b;
  b.tree_ = std::make_shared<const ExpressionTree>(std::move(bound));
  return b;
}

double BoundExpression::evaluate(std::span<const double> vars) const {
  return Evaluator<double>(*tree_, vars, 0).eval(tree_->root);
}

std::pair<double, double> BoundExpression::derivative(std::span<const double> vars, std::size_t slot) const {
  const Dual r = Evaluator<Dual>(*tree_, vars, slot).eval(tree_->root);
  return {r.v, r.d};
}

std::size_t BoundExpression::slot_count() const {
  std::size_t count = 0;
  for (const auto& n : tree_->nodes) {
    if (n.kind == NodeKind::variable) count = std::max(count, n.slot + 1);
  }
  return count;
}

bool BoundExpression::depends_on(std::size_t slot) const {
  return std::any_of(tree_->nodes.begin(), tree_->nodes.end(),
                     [slot](const Node& n) { return n.kind == NodeKind::variable && n.slot == slot; });
}

const std::string& BoundExpression::source() const { return tree_->source; }

}  // namespace imech
