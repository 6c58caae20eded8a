#include "doctest.h"

#include <cmath>

#include "kld/stationary.hpp"

using namespace kld;

namespace {

// Reference profile of the drift interval from an independent quadrature of
// the closed-form first-order ODE, evaluated at high resolution and frozen.
constexpr double kDriftRef[3][2] = {
    {-0.5, 0.40323796846601084},
    {0.0, 0.46828741826954107},
    {0.5, 0.572591807696565},
};
constexpr double kDriftMean = 0.12947195125328262;

double mean_velocity(const StationaryProfile& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) s += p.grid.weights[i] * p.grid.nodes[i].a * p.values[i];
  return s;
}

}  // namespace

TEST_CASE("zero force gives the equilibrium") {
  const auto flat = builtin_model("flat-interval");
  const auto p = solve_stationary(flat, make_grid(flat, 32));
  for (double v : p.values) CHECK(std::abs(v - 0.5) < 1e-15);

  const auto rotor = builtin_model("sphere-rotor");
  const auto q = solve_stationary(rotor, make_grid(rotor, 32, 16));
  for (double v : q.values) CHECK(std::abs(v - 1.0) < 1e-10);
  CHECK(check_bounds(q, rotor).ok());
}

TEST_CASE("drift interval against the reference profile") {
  const auto drift = builtin_model("drift-interval");
  for (std::size_t n : {256u, 1024u}) {
    const auto p = solve_stationary(drift, make_grid(drift, n));
    const double tol = 4.0 / static_cast<double>(n);
    for (const auto& r : kDriftRef) CHECK(std::abs(p.value_at({r[0], 0.0}) - r[1]) < tol);
    CHECK(std::abs(mean_velocity(p) - kDriftMean) < tol);
    CHECK(check_bounds(p, drift).ok());
  }
  const auto fine = solve_stationary(drift, make_grid(drift, 2048));
  CHECK(ratio(fine, drift, {-1.0, 0.0}) == doctest::Approx(1.4).epsilon(5e-3));
  CHECK(ratio(fine, drift, {1.0, 0.0}) == doctest::Approx(0.6).epsilon(5e-3));
}

TEST_CASE("first-order convergence") {
  const auto drift = builtin_model("drift-interval");
  auto err = [&](std::size_t n) {
    const auto p = solve_stationary(drift, make_grid(drift, n));
    return std::abs(mean_velocity(p) - kDriftMean);
  };
  const double e1 = err(128), e2 = err(256);
  CHECK(e1 / e2 >= 1.8);
}

TEST_CASE("ring and sphere conserve mass") {
  const VelocityModel ring(ManifoldKind::Ring, expr::parse("(1+0.5*cos(theta))"), {expr::parse("0.3*sin(theta)")},
                           0.6);
  const auto p = solve_stationary(ring, make_grid(ring, 128));
  CHECK(std::abs(p.mass() - 1.0) < 1e-12);
  CHECK(p.min() > 0.0);

  const VelocityModel tilt(ManifoldKind::Sphere, expr::parse("1"), {expr::parse("0.2*sin(phi)"), expr::parse("0.1*sin(phi)")},
                           0.7);
  const auto q = solve_stationary(tilt, make_grid(tilt, 32, 16));
  CHECK(std::abs(q.mass() - 1.0) < 1e-12);
  CHECK(check_bounds(q, tilt).ok());
}
