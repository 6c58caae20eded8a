#include "doctest.h"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>

#include "kld/expr.hpp"
#include "random_expr.hpp"

using namespace kld::expr;

namespace {

double ev(const std::string& src, const Bindings& b = {}) { return eval(parse(src), b); }

struct OpInfo {
  std::string text;
  int precedence;
  bool right_assoc;
  std::function<double(double, double)> apply;
};

const std::vector<OpInfo>& binary_ops() {
  static const std::vector<OpInfo> ops{
      {"+", 1, false, [](double a, double b) { return a + b; }},
      {"-", 1, false, [](double a, double b) { return a - b; }},
      {"*", 2, false, [](double a, double b) { return a * b; }},
      {"/", 2, false, [](double a, double b) { return a / b; }},
      {"^", 4, true, [](double a, double b) { return std::pow(a, b); }},
  };
  return ops;
}

std::optional<double> try_eval(const Expr& e, const Bindings& b) {
  try {
    return eval(e, b);
  } catch (const EvalError&) {
    return std::nullopt;
  }
}

}  // namespace

TEST_CASE("precedence examples") {
  CHECK(ev("2+3*4") == 14.0);
  CHECK(ev("tanh(3*v)", {{"v", 0.0}}) == 0.0);
  CHECK(ev("-2^2") == -4.0);
  CHECK(ev("sin(phi)", {{"phi", std::numbers::pi / 2}}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ev("0.2*(1-v^2)", {{"v", 1.0}}) == 0.0);
  CHECK(ev("1/2") == 0.5);
}

TEST_CASE("binary operator pairs follow the precedence table") {
  const double x = 2.0, y = 3.0, z = 2.0;
  for (const auto& o1 : binary_ops()) {
    for (const auto& o2 : binary_ops()) {
      SUBCASE((o1.text + " then " + o2.text).c_str()) {
        const std::string src = "2" + o1.text + "3" + o2.text + "2";
        const bool group_right = o2.precedence > o1.precedence || (o1.precedence == o2.precedence && o1.right_assoc);
        const double expected = group_right ? o1.apply(x, o2.apply(y, z)) : o2.apply(o1.apply(x, y), z);
        CHECK(ev(src) == expected);
      }
    }
  }
}

TEST_CASE("unary minus against each binary operator") {
  for (const auto& o : binary_ops()) {
    SUBCASE(("-a " + o.text + " b").c_str()) {
      // unary minus binds tighter than + - * / and looser than ^
      const double expected = o.text == "^" ? -o.apply(3.0, 2.0) : o.apply(-3.0, 2.0);
      CHECK(ev("-3" + o.text + "2") == expected);
    }
    SUBCASE(("a " + o.text + " -b").c_str()) { CHECK(ev("3" + o.text + "-2") == o.apply(3.0, -2.0)); }
  }
  CHECK(ev("--2") == 2.0);
}

TEST_CASE("power is right associative") {
  CHECK(ev("2^3^2") == 512.0);
  CHECK(ev("(2^3)^2") == 64.0);
}

TEST_CASE("functions and constants") {
  CHECK(ev("pi") == std::numbers::pi);
  CHECK(ev("e") == std::numbers::e);
  CHECK(ev("log(e)") == doctest::Approx(1.0));
  CHECK(ev("sqrt(16)+abs(-3)") == 7.0);
  CHECK(ev("exp(0)+cos(0)+sin(0)+tan(0)") == 2.0);
  CHECK(ev("2.5e-1*4") == 1.0);
}

TEST_CASE("positioned syntax errors") {
  auto offset_of = [](const std::string& src) -> std::size_t {
    try {
      parse(src);
    } catch (const ParseError& e) {
      return e.offset();
    }
    return std::string::npos;
  };
  CHECK(offset_of("1+foo") == 2);
  CHECK(offset_of("(1+2") == 0);
  CHECK(offset_of("1+2)") == 3);
  CHECK(offset_of("sin(1,2)") == 5);
  CHECK(offset_of("sin()") == 4);
  CHECK(offset_of("1+") == 2);
  CHECK(offset_of("") == 0);
  CHECK_THROWS_WITH_AS(parse("gama*2"), doctest::Contains("unknown identifier 'gama'"), ParseError);
  CHECK_THROWS_AS(parse("x", {"v"}), ParseError);
}

TEST_CASE("evaluation errors") {
  CHECK_THROWS_WITH_AS(ev("1/(v-v)", {{"v", 1.0}}), doctest::Contains("division by zero"), EvalError);
  CHECK_THROWS_WITH_AS(ev("log(0)"), doctest::Contains("log"), EvalError);
  CHECK_THROWS_WITH_AS(ev("log(-1)"), doctest::Contains("log"), EvalError);
  CHECK_THROWS_WITH_AS(ev("v+1"), doctest::Contains("unbound variable 'v'"), EvalError);
  CHECK_THROWS_AS(ev("sqrt(-1)"), EvalError);
  CHECK_THROWS_AS(ev("(-8)^(1/3)"), EvalError);
}

TEST_CASE("free variables") {
  const auto e = parse("sin(phi)*theta + phi - 2");
  CHECK(e.variables() == std::vector<std::string>{"phi", "theta"});
  CHECK(parse("pi*2").is_constant());
}

TEST_CASE("compiled program agrees with the tree walker") {
  kld::testing::RandomExprGen gen(7);
  const std::vector<std::string> slots{"v", "theta", "phi"};
  for (int i = 0; i < 2000; ++i) {
    const Expr e(gen.tree(5));
    const double xs[3] = {gen.value(), gen.value(), gen.value()};
    const Bindings b{{"v", xs[0]}, {"theta", xs[1]}, {"phi", xs[2]}};
    const Program prog(e, slots);
    const auto tree = try_eval(e, b);
    std::optional<double> flat;
    try {
      flat = prog(std::span<const double>(xs, 3));
    } catch (const EvalError&) {
    }
    REQUIRE(tree.has_value() == flat.has_value());
    if (tree && !std::isnan(*tree)) CHECK(*tree == *flat);
  }
  CHECK(Program(parse("0"), {}).is_zero());
  CHECK_FALSE(Program(parse("0*v"), {"v"}).is_zero());
}

TEST_CASE("print-parse round trip on random trees") {
  kld::testing::RandomExprGen gen(2024);
  for (int i = 0; i < 3000; ++i) {
    const Expr e(gen.tree(6));
    const Expr back = parse(to_string(e));
    REQUIRE(structurally_equal(e, back));
    const Bindings b{{"v", gen.value()}, {"theta", gen.value()}, {"phi", gen.value()}};
    const auto a = try_eval(e, b);
    const auto c = try_eval(back, b);
    REQUIRE(a.has_value() == c.has_value());
    if (a && !std::isnan(*a)) CHECK(*a == *c);
  }
}
