#include "kld/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

namespace kld::expr {

namespace {

struct FunctionEntry {
  std::string_view name;
  Function fn;
};

constexpr std::array<FunctionEntry, 8> kFunctions{{
    {"sin", Function::Sin},
    {"cos", Function::Cos},
    {"tan", Function::Tan},
    {"tanh", Function::Tanh},
    {"exp", Function::Exp},
    {"log", Function::Log},
    {"abs", Function::Abs},
    {"sqrt", Function::Sqrt},
}};

struct ConstantEntry {
  std::string_view name;
  double value;
};

constexpr std::array<ConstantEntry, 2> kConstants{{
    {"pi", std::numbers::pi},
    {"e", std::numbers::e},
}};

double apply(Function fn, double x) {
  switch (fn) {
    case Function::Sin: return std::sin(x);
    case Function::Cos: return std::cos(x);
    case Function::Tan: return std::tan(x);
    case Function::Tanh: return std::tanh(x);
    case Function::Exp: return std::exp(x);
    case Function::Log:
      if (!(x > 0.0)) throw EvalError("log of non-positive value " + std::to_string(x));
      return std::log(x);
    case Function::Abs: return std::abs(x);
    case Function::Sqrt:
      if (x < 0.0) throw EvalError("sqrt of negative value " + std::to_string(x));
      return std::sqrt(x);
  }
  return 0.0;
}

double apply(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div:
      if (b == 0.0) throw EvalError("division by zero");
      return a / b;
    case BinaryOp::Pow: {
      const double r = std::pow(a, b);
      if (std::isnan(r)) throw EvalError("power of negative base with non-integer exponent");
      return r;
    }
  }
  return 0.0;
}

char op_char(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return '+';
    case BinaryOp::Sub: return '-';
    case BinaryOp::Mul: return '*';
    case BinaryOp::Div: return '/';
    case BinaryOp::Pow: return '^';
  }
  return '?';
}

class Parser {
public:
  Parser(std::string_view src, const std::vector<std::string>& vars) : src_(src), vars_(vars) {}

  Expr run() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    auto root = expression();
    skip_ws();
    if (pos_ < src_.size()) {
      if (src_[pos_] == ')') throw ParseError("unbalanced ')'", pos_);
      throw ParseError(std::string("unexpected character '") + src_[pos_] + "'", pos_);
    }
    return Expr(std::move(root));
  }

private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) lhs = make_binary(BinaryOp::Add, lhs, term());
      else if (accept('-')) lhs = make_binary(BinaryOp::Sub, lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make_binary(BinaryOp::Mul, lhs, unary());
      else if (accept('/')) lhs = make_binary(BinaryOp::Div, lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_negate(unary());
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make_binary(BinaryOp::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      const std::size_t open = pos_++;
      auto inner = expression();
      if (!accept(')')) throw ParseError("unbalanced '(' opened", open);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    if (c == ')') throw ParseError("unbalanced ')'", pos_);
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
        pos_ = look;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    const auto text = src_.substr(start, pos_ - start);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ParseError("malformed number '" + std::string(text) + "'", start);
    return make_number(value);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string name(src_.substr(start, pos_ - start));

    for (const auto& f : kFunctions) {
      if (f.name != name) continue;
      skip_ws();
      if (pos_ >= src_.size() || src_[pos_] != '(')
        throw ParseError("function '" + name + "' expects one argument", pos_);
      const std::size_t open = pos_++;
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == ')')
        throw ParseError("wrong arity: '" + name + "' takes 1 argument, got 0", pos_);
      auto arg = expression();
      if (accept(',')) throw ParseError("wrong arity: '" + name + "' takes 1 argument", pos_ - 1);
      if (!accept(')')) throw ParseError("unbalanced '(' opened", open);
      return make_call(f.fn, std::move(arg));
    }
    for (const auto& k : kConstants) {
      if (k.name == name) {
        auto node = std::make_shared<Node>();
        node->kind = NodeKind::Constant;
        node->name = name;
        node->value = k.value;
        return node;
      }
    }
    if (std::find(vars_.begin(), vars_.end(), name) != vars_.end()) return make_variable(name);
    throw ParseError("unknown identifier '" + name + "'", start);
  }

  std::string_view src_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, const Bindings& b) {
  switch (n.kind) {
    case NodeKind::Number:
    case NodeKind::Constant: return n.value;
    case NodeKind::Variable: {
      auto it = b.find(n.name);
      if (it == b.end()) throw EvalError("unbound variable '" + n.name + "'");
      return it->second;
    }
    case NodeKind::Negate: return -eval_node(*n.lhs, b);
    case NodeKind::Binary: return apply(n.op, eval_node(*n.lhs, b), eval_node(*n.rhs, b));
    case NodeKind::Call: return apply(n.fn, eval_node(*n.lhs, b));
  }
  return 0.0;
}

void collect(const Node& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Variable) out.insert(n.name);
  if (n.lhs) collect(*n.lhs, out);
  if (n.rhs) collect(*n.rhs, out);
}

void render(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Number: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      return;
    }
    case NodeKind::Constant:
    case NodeKind::Variable: out += n.name; return;
    case NodeKind::Negate:
      out += "(-";
      render(*n.lhs, out);
      out += ')';
      return;
    case NodeKind::Binary:
      out += '(';
      render(*n.lhs, out);
      out += op_char(n.op);
      render(*n.rhs, out);
      out += ')';
      return;
    case NodeKind::Call:
      out += function_name(n.fn);
      out += '(';
      render(*n.lhs, out);
      out += ')';
      return;
  }
}

bool equal_nodes(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::Number: return a.value == b.value;
    case NodeKind::Constant:
    case NodeKind::Variable: return a.name == b.name;
    case NodeKind::Negate: return equal_nodes(*a.lhs, *b.lhs);
    case NodeKind::Binary: return a.op == b.op && equal_nodes(*a.lhs, *b.lhs) && equal_nodes(*a.rhs, *b.rhs);
    case NodeKind::Call: return a.fn == b.fn && equal_nodes(*a.lhs, *b.lhs);
  }
  return false;
}

}  // namespace

const std::vector<std::string>& default_variables() {
  static const std::vector<std::string> vars{"v", "theta", "phi", "x"};
  return vars;
}

std::vector<std::string> Expr::variables() const {
  std::set<std::string> names;
  if (root_) collect(*root_, names);
  return {names.begin(), names.end()};
}

Expr parse(std::string_view source) { return parse(source, default_variables()); }

Expr parse(std::string_view source, const std::vector<std::string>& allowed_variables) {
  return Parser(source, allowed_variables).run();
}

double eval(const Expr& expr, const Bindings& bindings) {
  if (expr.empty()) throw EvalError("empty expression");
  return eval_node(expr.root(), bindings);
}

std::string to_string(const Expr& expr) {
  std::string out;
  if (!expr.empty()) render(expr.root(), out);
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.empty() || b.empty()) return a.empty() == b.empty();
  return equal_nodes(a.root(), b.root());
}

NodePtr make_number(double value) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Number;
  n->value = value;
  return n;
}

NodePtr make_variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Variable;
  n->name = std::move(name);
  return n;
}

NodePtr make_negate(NodePtr operand) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Negate;
  n->lhs = std::move(operand);
  return n;
}

NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Binary;
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

NodePtr make_call(Function fn, NodePtr operand) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Call;
  n->fn = fn;
  n->lhs = std::move(operand);
  return n;
}

std::string_view function_name(Function fn) {
  for (const auto& f : kFunctions)
    if (f.fn == fn) return f.name;
  return "?";
}

// --- Program ---------------------------------------------------------------

Program::Program(const Expr& expr, const std::vector<std::string>& slots) {
  if (expr.empty()) throw EvalError("empty expression");
  emit(expr.root(), slots);
  std::size_t depth = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::Push:
      case Op::Load: max_depth_ = std::max(max_depth_, ++depth); break;
      case Op::Neg:
      case Op::Fn: break;
      default: --depth; break;
    }
  }
}

void Program::emit(const Node& n, const std::vector<std::string>& slots) {
  switch (n.kind) {
    case NodeKind::Number:
    case NodeKind::Constant: code_.push_back({Op::Push, Function::Sin, -1, n.value}); return;
    case NodeKind::Variable: {
      auto it = std::find(slots.begin(), slots.end(), n.name);
      if (it == slots.end()) throw EvalError("unbound variable '" + n.name + "'");
      code_.push_back({Op::Load, Function::Sin, static_cast<int>(it - slots.begin()), 0.0});
      constant_ = false;
      return;
    }
    case NodeKind::Negate:
      emit(*n.lhs, slots);
      code_.push_back({Op::Neg, Function::Sin, -1, 0.0});
      return;
    case NodeKind::Binary: {
      emit(*n.lhs, slots);
      if (n.op == BinaryOp::Pow && n.rhs->kind == NodeKind::Number && n.rhs->value == 2.0) {
        code_.push_back({Op::Square, Function::Sin, -1, 0.0});
        return;
      }
      emit(*n.rhs, slots);
      Op op = Op::Add;
      switch (n.op) {
        case BinaryOp::Add: op = Op::Add; break;
        case BinaryOp::Sub: op = Op::Sub; break;
        case BinaryOp::Mul: op = Op::Mul; break;
        case BinaryOp::Div: op = Op::Div; break;
        case BinaryOp::Pow: op = Op::Pow; break;
      }
      code_.push_back({op, Function::Sin, -1, 0.0});
      return;
    }
    case NodeKind::Call:
      emit(*n.lhs, slots);
      code_.push_back({Op::Fn, n.fn, -1, 0.0});
      return;
  }
}

bool Program::is_zero() const {
  if (!constant_ || code_.empty()) return false;
  try {
    return (*this)(std::span<const double>()) == 0.0;
  } catch (const EvalError&) {
    return false;
  }
}

double Program::operator()(std::span<const double> x) const {
  constexpr std::size_t kInline = 32;
  std::array<double, kInline> small;
  std::vector<double> big;
  double* stack = small.data();
  if (max_depth_ > kInline) {
    big.resize(max_depth_);
    stack = big.data();
  }
  std::size_t top = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::Push: stack[top++] = ins.value; break;
      case Op::Load: stack[top++] = x[static_cast<std::size_t>(ins.slot)]; break;
      case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
      case Op::Add: --top; stack[top - 1] += stack[top]; break;
      case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
      case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
      case Op::Div:
        --top;
        if (stack[top] == 0.0) throw EvalError("division by zero");
        stack[top - 1] /= stack[top];
        break;
      case Op::Pow:
        --top;
        stack[top - 1] = apply(BinaryOp::Pow, stack[top - 1], stack[top]);
        break;
      case Op::Square: stack[top - 1] *= stack[top - 1]; break;
      case Op::Fn: stack[top - 1] = apply(ins.fn, stack[top - 1]); break;
    }
  }
  return stack[0];
}

}  // namespace kld::expr
