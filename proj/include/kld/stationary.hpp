#pragma once

// Stationary velocity profile: the unit-mass solution of
//   div_v(Gamma m) = M * int(m) - m.

#include <Eigen/SparseCore>

#include <stdexcept>
#include <vector>

#include "kld/model.hpp"

namespace kld {

class StationaryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct StationaryProfile {
  VelocityGrid grid;
  std::vector<double> values;

  /// Piecewise-linear interpolation in chart coordinates (periodic in theta;
  /// constant beyond the outermost nodes).
  double value_at(const ChartPoint& c) const;
  /// Sum of w_i m_i.
  double mass() const;
  double min() const;
  double max() const;
};

/// Upwind finite-volume matrix D with (D f)_i ~ div_v(Gamma f)(v_i). Fluxes
/// telescope, so sum_i w_i (D f)_i = 0 exactly: no flux leaves V.
Eigen::SparseMatrix<double> velocity_divergence_matrix(const VelocityModel& model, const VelocityGrid& grid);

/// First-order conservative upwind discretisation of div_v(Gamma .) solved
/// with a sparse direct factorisation. A force that vanishes on the grid
/// short-circuits to m = M. The result is
/// normalised to unit discrete mass.
StationaryProfile solve_stationary(const VelocityModel& model, const VelocityGrid& grid);

/// M / m at a point.
double ratio(const StationaryProfile& profile, const VelocityModel& model, const ChartPoint& c);

struct StationaryBounds {
  double mass = 0.0;
  double min = 0.0;
  double max = 0.0;
  double upper_bound = 0.0;  // max M / alpha
  bool mass_ok = false;
  bool positive = false;
  bool below_upper = false;
  bool ok() const { return mass_ok && positive && below_upper; }
};

StationaryBounds check_bounds(const StationaryProfile& profile, const VelocityModel& model,
                              double mass_tol = 1e-10, double bound_slack = 1e-9);

}  // namespace kld
