#pragma once

// Small arithmetic expression language used by scenario files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | identifier | identifier '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: sin cos tan sqrt abs (one argument), min max (two arguments).
// The identifier `pi` is always bound to the constant pi.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "imech/error.hpp"

namespace imech {

namespace detail {
struct ExpressionTree;
}

/// Maps identifiers either to an evaluation slot or to a constant value.
class SymbolTable {
 public:
  void add_variable(const std::string& name, std::size_t slot);
  void add_constant(const std::string& name, double value);

  bool contains(const std::string& name) const;
  /// Slot index or constant value; nullptr when unknown.
  const std::variant<std::size_t, double>* find(const std::string& name) const;

 private:
  std::map<std::string, std::variant<std::size_t, double>> symbols_;
};

class BoundExpression;

/// Parsed, unbound expression.
class Expression {
 public:
  /// Throws ExpressionError with the byte offset of the offending token.
  static Expression parse(std::string_view source);
  static Expression constant(double value);

  const std::string& source() const { return source_; }

  /// Canonical text: minimal parentheses, shortest round-trip numbers.
  /// parse(canonical()).canonical() == canonical().
  std::string canonical() const;

  /// Every identifier referenced (excluding function names), sorted, unique.
  std::vector<std::string> identifiers() const;

  /// Resolves identifiers. Unknown names raise ExpressionError located at
  /// the first occurrence.
  BoundExpression bind(const SymbolTable& symbols) const;

 private:
  std::shared_ptr<const detail::ExpressionTree> tree_;
  std::string source_;
};

/// Expression with identifiers resolved to slots or constants. Immutable and
/// cheap to copy.
class BoundExpression {
 public:
  BoundExpression() = default;

  /// `vars[slot]` supplies each variable. Division by zero, sqrt of a
  /// negative number and non-real powers raise ExpressionError located at the
  /// offending sub-expression.
  double evaluate(std::span<const double> vars) const;

  /// Value and exact (forward-mode) partial derivative with respect to `slot`.
  std::pair<double, double> derivative(std::span<const double> vars, std::size_t slot) const;

  /// One more than the highest referenced slot (0 if none).
  std::size_t slot_count() const;
  bool depends_on(std::size_t slot) const;
  bool valid() const { return static_cast<bool>(tree_); }

  const std::string& source() const;

 private:
  friend class Expression;
  std::shared_ptr<const detail::ExpressionTree> tree_;
};

}  // namespace imech
