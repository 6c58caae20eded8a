#include "doctest.h"

#include <cmath>

#include "kld/kinetic.hpp"

using namespace kld;

namespace {

const expr::Expr kBump = expr::parse("0.5*(1-cos(2*pi*x/L))", {"x", "L"});

VelocityModel ring_model() {
  return VelocityModel(ManifoldKind::Ring, expr::parse("(1+0.5*cos(theta))"), {expr::parse("0.3*sin(theta)")}, 0.6,
                       "ring");
}

}  // namespace

TEST_CASE("well-prepared data and the Hopf-Cole transform") {
  const auto drift = builtin_model("drift-interval");
  const auto prof = solve_stationary(drift, make_grid(drift, 32));
  const SpaceGrid space{64, 2.0};
  const auto phi0 = sample_initial(kBump, space);
  const auto f = init_well_prepared(prof, phi0, 0.2, space);
  std::size_t jmax = 0, jmin = 0;
  for (std::size_t j = 0; j < space.nx; ++j) {
    if (f.at(j, 5) > f.at(jmax, 5)) jmax = j;
    if (f.at(j, 5) < f.at(jmin, 5)) jmin = j;
  }
  CHECK(jmax == 0);
  CHECK(jmin == space.nx / 2);
  const auto pot = hopf_cole(f, prof);
  for (std::size_t j = 0; j < space.nx; ++j)
    for (std::size_t i = 0; i < f.nv(); ++i) CHECK(std::abs(pot.at(j, i) - phi0[j]) < 1e-14);

  auto shifted = f;
  for (double& v : shifted.f) v *= std::exp(-0.3 / 0.2);
  for (std::size_t i = 0; i < f.nv(); ++i) CHECK(hopf_cole(shifted, prof).at(3, i) == doctest::Approx(phi0[3] + 0.3));

  shifted.f[7] = 0.0;
  CHECK_THROWS_WITH_AS(hopf_cole(shifted, prof), doctest::Contains("velocity node 7"), KineticError);
  CHECK_THROWS_AS(sample_initial(expr::parse("x-0.5", {"x", "L"}), space), KineticError);
}

TEST_CASE("collision relaxes towards M rho") {
  const auto flat = builtin_model("flat-interval");
  const auto prof = solve_stationary(flat, make_grid(flat, 16));
  const SpaceGrid space{8, 1.0};
  const KineticStepper stepper(flat, prof, 0.1, 0.1, space);  // dt / eps = 1
  PhaseField f = init_well_prepared(prof, std::vector<double>(8, 0.0), 0.1, space);
  for (double& v : f.f) v *= 2.0;
  const auto before = f.f;
  stepper.velocity_step(f);
  for (std::size_t k = 0; k < f.f.size(); ++k) CHECK(std::abs(f.f[k] - before[k]) < 1e-15);

  // a non-equilibrium column relaxes by the factor 1 / (1 + dt / eps)
  f.at(0, 3) += 1.0;
  const double rho = f.mass() / space.dx();
  (void)rho;
  PhaseField g = f;
  stepper.velocity_step(g);
  double col_before = 0.0, col_after = 0.0;
  for (std::size_t i = 0; i < g.nv(); ++i) {
    col_before += f.grid.weights[i] * f.at(0, i);
    col_after += g.grid.weights[i] * g.at(0, i);
  }
  CHECK(col_after == doctest::Approx(col_before).epsilon(1e-14));
  const double m3 = col_before * 0.5;
  CHECK(g.at(0, 3) == doctest::Approx((f.at(0, 3) + m3) / 2.0).epsilon(1e-13));
}

TEST_CASE("equilibrium is preserved") {
  const auto flat = builtin_model("flat-interval");
  const auto prof = solve_stationary(flat, make_grid(flat, 16));
  const SpaceGrid space{16, 1.0};
  const KineticStepper stepper(flat, prof, 0.3, kinetic_cfl_limit(space), space);
  PhaseField f = init_well_prepared(prof, std::vector<double>(16, 0.0), 0.3, space);
  const auto start = f.f;
  for (int k = 0; k < 10000; ++k) stepper.step(f);
  double worst = 0.0;
  for (std::size_t k = 0; k < f.f.size(); ++k) worst = std::max(worst, std::abs(f.f[k] - start[k]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("mass is conserved and f stays positive") {
  for (const auto& model :
       {builtin_model("drift-interval"), builtin_model("flat-interval"), ring_model(), builtin_model("sphere-rotor")}) {
    const auto prof = solve_stationary(model, make_grid(model, 16));
    const SpaceGrid space{32, 1.0};
    const KineticStepper stepper(model, prof, 0.1, kinetic_cfl_limit(space), space);
    PhaseField f = init_well_prepared(prof, sample_initial(kBump, space), 0.1, space);
    const double m0 = f.mass();
    for (int k = 0; k < 1000; ++k) {
      stepper.step(f);
      REQUIRE(f.min() > 0.0);
    }
    CHECK(std::abs(f.mass() / m0 - 1.0) <= 1e-9);
  }
}

TEST_CASE("stationary profile is a steady state of the velocity step") {
  const auto drift = builtin_model("drift-interval");
  const auto prof = solve_stationary(drift, make_grid(drift, 64));
  const SpaceGrid space{8, 1.0};
  const KineticStepper stepper(drift, prof, 0.05, 0.1, space);
  PhaseField f = init_well_prepared(prof, std::vector<double>(8, 0.0), 0.05, space);
  for (int k = 0; k < 100; ++k) stepper.step(f);
  const auto pot = hopf_cole(f, prof);
  for (double v : pot.phi) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("runs respect the a priori bounds") {
  const auto drift = builtin_model("drift-interval");
  const auto prof = solve_stationary(drift, make_grid(drift, 32));
  KineticConfig cfg;
  cfg.eps = 0.2;
  cfg.T = 0.5;
  cfg.space = {64, 1.0};
  cfg.snapshot_times = {0.25};
  const auto run = run_kinetic(drift, prof, kBump, cfg);
  CHECK(run.bounds_ok);
  CHECK(run.snapshots.size() == 2);
  CHECK(run.snapshots.back().t == doctest::Approx(0.5));
  for (const auto& d : run.diagnostics) {
    CHECK(d.min_phi >= -kBoundSlack);
    CHECK(d.max_phi <= d.bound + kBoundSlack);
  }

  const auto zero = run_kinetic(drift, prof, expr::parse("0", {"x", "L"}), cfg);
  for (double v : zero.snapshots.back().phi) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("time step and grid checks") {
  const auto flat = builtin_model("flat-interval");
  const auto prof = solve_stationary(flat, make_grid(flat, 16));
  const SpaceGrid space{16, 1.0};
  CHECK_THROWS_AS(KineticStepper(flat, prof, 0.1, 0.1, space), KineticError);
  CHECK_THROWS_AS(KineticStepper(flat, prof, 0.1, 0.01, SpaceGrid{4, 1.0}), KineticError);
}
