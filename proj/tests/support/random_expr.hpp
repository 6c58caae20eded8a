#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kld/expr.hpp"

namespace kld::testing {

// Random trees over the whole grammar. Literals are non-negative (a leading
// minus is a Negate node in the grammar).
class RandomExprGen {
public:
  explicit RandomExprGen(std::uint64_t seed) : rng_(seed) {}

  expr::NodePtr tree(int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 5);
    switch (pick(rng_)) {
      case 0: return expr::make_number(literal());
      case 1: return expr::make_variable(vars_[std::uniform_int_distribution<std::size_t>(0, vars_.size() - 1)(rng_)]);
      case 2: return expr::make_negate(tree(depth - 1));
      case 3: return expr::make_call(static_cast<expr::Function>(std::uniform_int_distribution<int>(0, 7)(rng_)),
                                     tree(depth - 1));
      default:
        return expr::make_binary(static_cast<expr::BinaryOp>(std::uniform_int_distribution<int>(0, 4)(rng_)),
                                 tree(depth - 1), tree(depth - 1));
    }
  }

  double literal() {
    std::uniform_int_distribution<int> kind(0, 2);
    switch (kind(rng_)) {
      case 0: return std::uniform_int_distribution<int>(0, 20)(rng_);
      case 1: return std::uniform_real_distribution<double>(0.0, 10.0)(rng_);
      default: return std::exp(std::uniform_real_distribution<double>(-20.0, 20.0)(rng_));
    }
  }

  double value() { return std::uniform_real_distribution<double>(-3.0, 3.0)(rng_); }

  const std::vector<std::string>& variables() const { return vars_; }

private:
  std::mt19937_64 rng_;
  std::vector<std::string> vars_{"v", "theta", "phi"};
};

}  // namespace kld::testing
