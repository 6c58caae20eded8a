#pragma once

// Scaled kinetic equation on a periodic line,
//   f_t + v_x f_x + (1/eps) div_v(Gamma f) = (1/eps)(M rho - f),
// and its Hopf-Cole transform phi = -eps log(f / M~).

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <memory>
#include <stdexcept>
#include <vector>

#include "kld/expr.hpp"
#include "kld/model.hpp"
#include "kld/stationary.hpp"

namespace kld {

class KineticError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SpaceGrid {
  std::size_t nx = 0;
  double L = 1.0;
  double dx() const { return L / static_cast<double>(nx); }
  double x(std::size_t j) const { return static_cast<double>(j) * dx(); }
};

/// f[j * nv + i] is the value at x_j and velocity node i.
struct PhaseField {
  double t = 0.0;
  double eps = 1.0;
  SpaceGrid space;
  VelocityGrid grid;
  std::vector<double> f;

  std::size_t nv() const { return grid.size(); }
  double& at(std::size_t j, std::size_t i) { return f[j * nv() + i]; }
  double at(std::size_t j, std::size_t i) const { return f[j * nv() + i]; }
  double mass() const;
  double min() const;
};

struct PotentialField {
  double t = 0.0;
  double eps = 1.0;
  SpaceGrid space;
  VelocityGrid grid;
  std::vector<double> phi;  // same layout as PhaseField::f

  double at(std::size_t j, std::size_t i) const { return phi[j * grid.size() + i]; }
  /// nu-average over velocities at x_j.
  double velocity_mean(std::size_t j) const;
  /// max_v phi - min_v phi at x_j.
  double velocity_spread(std::size_t j) const;
};

/// Evaluates phi0 on the space grid; phi0 may use the variables x and L.
std::vector<double> sample_initial(const expr::Expr& phi0, const SpaceGrid& space);

/// f = M~(v) exp(-phi0(x) / eps).
PhaseField init_well_prepared(const StationaryProfile& profile, const std::vector<double>& phi0, double eps,
                              const SpaceGrid& space);

/// phi = -eps log(f / M~); throws naming the node if f <= 0.
PotentialField hopf_cole(const PhaseField& field, const StationaryProfile& profile);

/// Time stepper for one (model, grid, eps, dt). The space line follows the
/// first embedding axis, so particles move with speed v_1. Per step: half a step of
/// x-transport, one implicit velocity step for force and collision, half a
/// step of x-transport.
///
/// x-transport shifts each velocity column by v_x dt with periodic cubic
/// Lagrange interpolation. On a uniform periodic grid that operator is
/// circulant with unit column sums, so it conserves mass; a global rescale
/// removes the remaining rounding drift.
///
/// The velocity step solves (I + k (D + I)) f_new = f + k M rho with
/// k = dt / eps and D the stationary upwind divergence matrix. This is the
/// exact implicit relaxation when Gamma = 0. The matrix is an M-matrix, so
/// the step is positive and order preserving, rho is conserved per x, and
/// the stationary profile is an exact steady state.
class KineticStepper {
public:
  KineticStepper(const VelocityModel& model, const StationaryProfile& profile, double eps, double dt,
                 const SpaceGrid& space);

  double dt() const { return dt_; }
  void step(PhaseField& field) const;
  void transport_x(PhaseField& field, double dt) const;
  void velocity_step(PhaseField& field) const;

private:
  double eps_;
  double dt_;
  SpaceGrid space_;
  std::vector<double> vx_;     // x-component of each velocity node
  std::vector<double> weights_;
  std::vector<double> source_;  // k M_i with sum_i w_i M_i = 1
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

/// Largest dt allowed by the accuracy bound dt <= 0.9 dx / max|v|.
double kinetic_cfl_limit(const SpaceGrid& space);

struct KineticConfig {
  double eps = 0.2;
  double T = 0.5;
  double dt = 0.0;  // 0: largest step within the CFL bound that lands on T
  SpaceGrid space{256, 1.0};
  std::vector<double> snapshot_times;  // T is always included
};

struct KineticDiagnostics {
  double t = 0.0;
  double mass = 0.0;
  double min_f = 0.0;
  double min_phi = 0.0;
  double max_phi = 0.0;
  double bound = 0.0;   // ||phi0||_inf + (max M / min M~) t
  double margin = 0.0;  // min(min_phi, bound - max_phi)
};

struct KineticRun {
  std::vector<PotentialField> snapshots;
  std::vector<KineticDiagnostics> diagnostics;  // one per step, plus t = 0
  PhaseField final_field;
  bool bounds_ok = true;
};

/// Slack for the a priori bound check, absorbing rounding in the transform.
inline constexpr double kBoundSlack = 1e-9;

KineticRun run_kinetic(const VelocityModel& model, const StationaryProfile& profile, const expr::Expr& phi0,
                       const KineticConfig& config);

}  // namespace kld
