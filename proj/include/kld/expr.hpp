#pragma once

// Small arithmetic expression language used to give the jump density M,
// the force field components and initial potentials in config files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | name | name '(' expr ')' | '(' expr ')'

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kld::expr {

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind { Number, Constant, Variable, Negate, Binary, Call };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class Function { Sin, Cos, Tan, Tanh, Exp, Log, Abs, Sqrt };

struct Node {
  NodeKind kind = NodeKind::Number;
  double value = 0.0;           // Number, Constant
  std::string name;             // Constant, Variable
  BinaryOp op = BinaryOp::Add;  // Binary
  Function fn = Function::Sin;  // Call
  std::shared_ptr<const Node> lhs;  // Binary lhs, Negate/Call operand
  std::shared_ptr<const Node> rhs;  // Binary rhs
};

using NodePtr = std::shared_ptr<const Node>;

/// Immutable expression tree. Cheap to copy; safe to evaluate concurrently.
class Expr {
public:
  Expr() = default;
  explicit Expr(NodePtr root) : root_(std::move(root)) {}

  const Node& root() const { return *root_; }
  bool empty() const { return root_ == nullptr; }

  /// Names of the free variables, sorted and unique.
  std::vector<std::string> variables() const;

  /// True when the tree contains no variables.
  bool is_constant() const { return variables().empty(); }

private:
  NodePtr root_;
};

using Bindings = std::map<std::string, double, std::less<>>;

/// Default identifiers usable as variables.
const std::vector<std::string>& default_variables();

Expr parse(std::string_view source);
Expr parse(std::string_view source, const std::vector<std::string>& allowed_variables);

double eval(const Expr& expr, const Bindings& bindings);

/// Fully parenthesised rendering that parses back to the same tree.
std::string to_string(const Expr& expr);

bool structurally_equal(const Expr& a, const Expr& b);

// Builders, mostly for tests and generators.
NodePtr make_number(double value);
NodePtr make_variable(std::string name);
NodePtr make_negate(NodePtr operand);
NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs);
NodePtr make_call(Function fn, NodePtr operand);

std::string_view function_name(Function fn);

/// Flattened postfix form of an expression with variables bound to slots.
/// Evaluation allocates nothing; it is what the numerical kernels call.
class Program {
public:
  Program() = default;
  Program(const Expr& expr, const std::vector<std::string>& slots);

  double operator()(std::span<const double> slot_values) const;
  double operator()(double a) const { return (*this)(std::span<const double>(&a, 1)); }
  double operator()(double a, double b) const {
    const double xs[2] = {a, b};
    return (*this)(std::span<const double>(xs, 2));
  }

  bool is_constant() const { return constant_; }
  /// True when the program is the literal zero (or a constant equal to zero).
  bool is_zero() const;

private:
  enum class Op : unsigned char { Push, Load, Neg, Add, Sub, Mul, Div, Pow, Square, Fn };
  struct Instr {
    Op op;
    Function fn;
    int slot;
    double value;
  };
  void emit(const Node& node, const std::vector<std::string>& slots);

  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
  bool constant_ = true;
};

}  // namespace kld::expr
