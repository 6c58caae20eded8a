#pragma once

// Limiting Hamilton-Jacobi equation phi_t + H(phi_x) = 0 on a periodic line,
// with a Lax-Friedrichs monotone scheme and a Hopf-Lax reference solution.

#include <functional>
#include <stdexcept>
#include <vector>

#include "kld/hamiltonian.hpp"
#include "kld/kinetic.hpp"

namespace kld {

class HJError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ScalarField1D {
  double t = 0.0;
  SpaceGrid space;
  std::vector<double> phi;
  std::size_t clamped = 0;  // H lookups outside the table so far
};

/// phi_j <- phi_j - dt [H((D-phi + D+phi)/2) - (alpha/2)(D+phi - D-phi)].
/// Requires alpha >= the table's Lipschitz bound and dt <= dx / (2 alpha).
ScalarField1D lf_step(const ScalarField1D& field, const HamiltonianTable& table, double dt, double alpha = 1.0);

struct HJResult {
  ScalarField1D field;                 // at T
  std::vector<ScalarField1D> snapshots;  // at the requested times, then T
};

/// Repeated lf_step from phi0 to T. dt = 0 picks the largest CFL step that
/// lands on T.
HJResult solve_hj(const std::vector<double>& phi0, const HamiltonianTable& table, double T, const SpaceGrid& space,
                  double dt = 0.0, double alpha = 1.0, const std::vector<double>& snapshot_times = {});

/// Hopf-Lax formula phi(t, x) = min_y [phi0(y) + t L((x - y) / t)] with y on
/// a grid four times finer than the output grid and periodic images taken
/// into account. L is interpolated linearly from the rate table and is
/// infinite outside its x range. Refuses non-convex tables.
std::vector<double> hopf_lax_oracle(const std::function<double(double)>& phi0, const HamiltonianTable& table,
                                    const RateTable& rate, double t, const SpaceGrid& space);

}  // namespace kld
