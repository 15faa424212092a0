#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spikeforge/error.hpp"

namespace spikeforge::expr {

/// Raised for syntax errors (with a 0-based character position) and for
/// evaluation failures (unbound names, domain errors, non-finite results).
class ExprError : public ConfigError {
 public:
  ExprError(std::string message, std::size_t position = npos);

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

enum class Func { Exp, Log, Abs, Min, Max, Tanh, Sqrt, Pow };

enum class NodeKind { Number, Variable, Negate, Add, Sub, Mul, Div, Power, Call };

struct Node {
  NodeKind kind = NodeKind::Number;
  double value = 0.0;     // Number
  std::string name;       // Variable
  Func func = Func::Exp;  // Call
  std::vector<Node> args;
};

/// Parsed arithmetic expression. Immutable and freely shareable.
class Expression {
 public:
  Expression() = default;
  Expression(Node root, std::string source) : root_(std::move(root)), source_(std::move(source)) {}

  const Node& root() const noexcept { return root_; }
  const std::string& source() const noexcept { return source_; }

 private:
  Node root_;
  std::string source_;
};

/// Name -> value bindings used by eval().
class Environment {
 public:
  Environment() = default;
  Environment(std::initializer_list<std::pair<const std::string, double>> init) : bindings_(init) {}

  void bind(std::string name, double value) { bindings_[std::move(name)] = value; }
  const double* find(std::string_view name) const;
  const std::map<std::string, double, std::less<>>& bindings() const noexcept { return bindings_; }

 private:
  std::map<std::string, double, std::less<>> bindings_;
};

/// Grammar (lowest to highest precedence):
///   expr  := term (('+'|'-') term)*
///   term  := unary (('*'|'/') unary)*
///   unary := '-' unary | power
///   power := primary ('^' unary)?          right-associative
///   primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
/// so "-2^2" is -(2^2) and "2^3^2" is 2^(3^2).
Expression parse(std::string_view source);

double eval(const Expression& e, const Environment& env);

std::set<std::string> free_vars(const Expression& e);

/// Fully parenthesized text that re-parses to an equivalent tree.
std::string to_string(const Expression& e);

std::string_view func_name(Func f) noexcept;

/// Maps identifiers to fixed slots so compiled programs can read a flat
/// array instead of a name lookup.
class SlotTable {
 public:
  std::size_t add(const std::string& name);
  /// Returns npos if absent.
  std::size_t find(std::string_view name) const;
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<std::string> names_;
};

/// Postfix form of an Expression bound to a SlotTable. Produces results
/// bit-identical to eval() on the equivalent Environment.
class Program {
 public:
  Program() = default;
  /// Throws ExprError if a free identifier has no slot.
  Program(const Expression& e, const SlotTable& slots);

  double run(std::span<const double> slots) const;
  bool empty() const noexcept { return code_.empty(); }
  const std::string& source() const noexcept { return source_; }

 private:
  enum class Op : unsigned char { Push, Load, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Abs, Min, Max, Tanh, Sqrt };
  struct Instr {
    Op op;
    std::size_t slot;
    double value;
  };
  void emit(const Node& n, const SlotTable& slots);

  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
  std::vector<std::string> slot_names_;
  std::string source_;
};

}  // namespace spikeforge::expr
