#pragma once

// Effective Hamiltonian H(p) = inf{H : int M~ Q_{p,H} dnu <= 1}, where
//   Q_{p,H}(v) = int_0^inf r(phi_t v) exp(-int_0^t (r + H - phi_s v . p) ds) dt,
// r = M / M~ and phi is the flow of -Gamma.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "kld/flow.hpp"
#include "kld/model.hpp"
#include "kld/stationary.hpp"

namespace kld {

/// Divergent integrals are reported as +infinity.
inline constexpr double kDivergent = std::numeric_limits<double>::infinity();

class HamiltonianError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct HamiltonianControls {
  FlowControls flow{1e-2, 1e4, 1e-9, 100, 1e-8};
  double exponent_cap = 40.0;  // stop once the accumulated exponent passes this
  double rate_eps = 1e-8;      // tail decay rates below this count as divergent
  double probe_rel = 1e-6;     // singular probe offset, relative to 1 + |H_crit|
  double bisect_tol = 1e-10;
};

struct SpectralSolution {
  std::vector<double> p;
  double H = 0.0;
  double H_crit = 0.0;
  double integral = 0.0;  // I(p, H); at the probe point when singular
  std::vector<double> q;  // kDivergent where Q diverges
  std::vector<double> eta;
  bool singular = false;
  std::optional<OmegaLimit> atom;
  double mass_deficit = 0.0;
};

/// Characteristic of one velocity: the flow of -Gamma sampled at step ends
/// and midpoints, plus what happens after the last sample. Independent of
/// (p, H), so it is built once and reused by every evaluation.
struct Characteristic {
  enum class Tail { Fixed, Periodic };
  std::size_t dim = 1;
  std::vector<double> dt;       // one entry per step
  std::vector<double> samples;  // (r, v_1..v_dim) at 2 * steps + 1 half-step points
  Tail tail = Tail::Fixed;
  std::size_t period_first_step = 0;
  double tail_r = 0.0;        // Fixed: r at the limit point
  std::vector<double> tail_v;  // Fixed: the limit velocity
  OmegaLimit limit;
  std::size_t omega = 0;  // index into the solver's omega-limit list
};

/// Caches the characteristics of every grid node and the omega-limit data
/// needed for H_crit. All queries are const and may run concurrently. The
/// model and profile must outlive the solver.
class HamiltonianSolver {
public:
  HamiltonianSolver(const VelocityModel& model, const StationaryProfile& profile, HamiltonianControls controls = {});

  const VelocityModel& model() const { return *model_; }
  const StationaryProfile& profile() const { return *profile_; }
  const HamiltonianControls& controls() const { return controls_; }
  std::size_t dim() const { return dim_; }
  const std::vector<OmegaLimit>& omega_limits() const { return omegas_; }

  /// Q at grid node i.
  double eval_Q(std::size_t node, std::span<const double> p, double H) const;
  /// I(p, H) = sum w_i M~_i Q_i; kDivergent if any node diverges.
  double normalization_integral(std::span<const double> p, double H) const;
  /// max over omega-limit sets of the time average of v.p - r.
  double critical_H(std::span<const double> p) const;
  /// Index of the omega-limit set attaining critical_H.
  std::size_t critical_omega(std::span<const double> p) const;
  SpectralSolution solve(std::span<const double> p) const;
  /// Residual of the spectral equation at interior nodes, relative to max Q.
  double eigen_residual(const SpectralSolution& sol) const;

  /// Evaluates a characteristic built elsewhere (see eval_Q below).
  double evaluate(const Characteristic& ch, std::span<const double> p, double H) const;
  Characteristic characteristic(const ChartPoint& v) const;

private:
  struct Tilted;
  double omega_rate(std::size_t k, std::span<const double> p, double H) const;
  /// Pre-multiplies every node's quadrature by exp(-A) at H = h0 so that
  /// I(p, h0 + d) for d >= 0 costs one multiply-add per sample.
  std::vector<Tilted> tilt(std::span<const double> p, double h0) const;
  double tilted_q(const Tilted& node, double d) const;
  double tilted_integral(const std::vector<Tilted>& nodes, double d) const;

  const VelocityModel* model_;
  const StationaryProfile* profile_;
  HamiltonianControls controls_;
  std::size_t dim_;
  std::vector<double> density_;  // M~ at the nodes
  std::vector<double> ratio_;    // M / M~ at the nodes
  std::vector<Characteristic> nodes_;
  std::vector<OmegaLimit> omegas_;
  std::vector<std::vector<double>> omega_mean_v_;
  std::vector<double> omega_mean_r_;
};

/// Q_{p,H}(v) at an arbitrary velocity.
double eval_Q(const HamiltonianSolver& solver, std::span<const double> p, double H, const ChartPoint& v);

struct Axis {
  double min = 0.0;
  double max = 0.0;
  std::size_t steps = 1;  // number of nodes
  double at(std::size_t k) const;
};

struct HamiltonianTable {
  std::vector<Axis> axes;
  std::vector<std::vector<double>> p;  // row-major, last axis fastest
  std::vector<double> H;
  std::vector<double> H_crit;
  std::vector<double> residual;  // I(p, H) - 1
  std::vector<unsigned char> singular;
  double lipschitz = 0.0;  // largest adjacent-node slope

  std::size_t size() const { return H.size(); }
  std::size_t dim() const { return axes.size(); }
  /// Multilinear interpolation; points outside the grid are clamped and a
  /// warning is printed once per table.
  double query(std::span<const double> p) const;

private:
  mutable bool warned_ = false;
};

HamiltonianTable build_table(const HamiltonianSolver& solver, const std::vector<Axis>& axes);

/// Largest finite-difference slope between adjacent nodes.
double table_lipschitz(const HamiltonianTable& table);

/// Non-negative second differences along every axis, within tol.
bool table_convex(const HamiltonianTable& table, double tol = 1e-8);

struct RateTable {
  std::vector<std::vector<double>> x;
  std::vector<double> L;
  std::vector<std::vector<double>> argmax_p;
  std::vector<unsigned char> boundary;  // sup attained on the table boundary: L is a lower bound
};

/// L(x) = max_p (p.x - H(p)) over table nodes with three-point parabolic
/// refinement along each axis. The default x grid covers [-1, 1]^d.
RateTable legendre_transform(const HamiltonianTable& table);
RateTable legendre_transform(const HamiltonianTable& table, const std::vector<std::vector<double>>& xs);

}  // namespace kld
