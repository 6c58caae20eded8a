#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "kld/expr.hpp"

namespace kld {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

enum class ManifoldKind { Interval, Ring, Sphere };

std::string to_string(ManifoldKind kind);
ManifoldKind manifold_kind_from_string(const std::string& name);

/// Chart coordinates. Interval: a = v. Ring: a = theta. Sphere: a = theta, b = phi.
struct ChartPoint {
  double a = 0.0;
  double b = 0.0;
};

class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Velocity set V with its measure, the jump density M and the force field.
///
/// The force is given by its chart components: the scalar field on the
/// interval, the angular speed along e_theta on the ring, and the
/// coefficients (a, b) on the unit frame (e_theta, e_phi) on the sphere.
/// The measure is Lebesgue on [-1, 1] and the normalised arc/surface measure
/// on the ring and the sphere.
class VelocityModel {
public:
  VelocityModel(ManifoldKind kind, expr::Expr density, std::vector<expr::Expr> force, double alpha,
                std::string name = {});

  ManifoldKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double alpha() const { return alpha_; }

  /// Embedding dimension d.
  int dim() const;
  /// Number of chart coordinates.
  int chart_dim() const { return kind_ == ManifoldKind::Sphere ? 2 : 1; }
  /// nu(V).
  double measure() const { return kind_ == ManifoldKind::Interval ? 2.0 : 1.0; }
  /// sup over V of |v|.
  double max_speed() const { return 1.0; }

  const expr::Expr& density_expr() const { return density_expr_; }
  const std::vector<expr::Expr>& force_exprs() const { return force_exprs_; }

  double density(const ChartPoint& c) const;
  /// Chart-frame components of the force; the second entry is zero unless Sphere.
  std::array<double, 2> force(const ChartPoint& c) const;
  /// Euclidean norm of the force vector at c.
  double force_norm(const ChartPoint& c) const;
  /// Every force component is the literal constant zero.
  bool force_vanishes() const { return force_vanishes_; }

  Vec3 embed(const ChartPoint& c) const;
  /// Inverse of embed for points of V (Sphere: theta in [0, 2pi), phi in [0, pi]).
  ChartPoint chart_of(const Vec3& x) const;
  /// Canonical chart point: theta wrapped into [0, 2pi), interval clamped.
  ChartPoint wrap(const ChartPoint& c) const;
  /// Distance between two points of V measured in the embedding.
  double distance(const ChartPoint& a, const ChartPoint& b) const;

  /// Throws ModelError when the chart point lies outside the chart ranges.
  void check_chart(const ChartPoint& c) const;

private:
  ManifoldKind kind_;
  std::string name_;
  expr::Expr density_expr_;
  std::vector<expr::Expr> force_exprs_;
  double alpha_;
  expr::Program density_;
  std::vector<expr::Program> force_;
  bool force_vanishes_ = false;
};

/// Embedded vector of a chart point; throws ModelError on out-of-range input.
Vec3 embed(const VelocityModel& model, const ChartPoint& c);

/// div Gamma at a chart point by central differences (step 1e-5).
double divergence_gamma(const VelocityModel& model, const ChartPoint& c);

struct ValidationReport {
  double min_density = 0.0;
  double density_integral = 0.0;
  double min_one_plus_div = 0.0;
  double max_one_plus_div = 0.0;
  double boundary_force = 0.0;  // max |Gamma| over the interval endpoints
  bool density_positive = false;
  bool density_normalised = false;
  bool divergence_bound = false;  // min(1 + div Gamma) >= alpha > 0
  bool boundary_null = false;
  bool passed() const { return density_positive && density_normalised && divergence_bound && boundary_null; }
};

ValidationReport validate(const VelocityModel& model, std::size_t resolution = 256);

enum class Quadrature { Default, Trapezoid, GaussLegendre };

/// Velocity nodes with quadrature weights for nu.
///
/// Sphere grids are stored phi-band major: node (i, j) with theta index i
/// and cos(phi) index j lives at j * n_theta + i.
struct VelocityGrid {
  ManifoldKind kind = ManifoldKind::Interval;
  Quadrature quadrature = Quadrature::Trapezoid;
  std::vector<ChartPoint> nodes;
  std::vector<Vec3> vectors;
  std::vector<double> weights;
  std::size_t n_theta = 0;     // Ring, Sphere
  std::size_t n_band = 0;      // Sphere: number of cos(phi) nodes
  std::vector<double> mu;      // Sphere: cos(phi) nodes, ascending
  std::vector<double> mu_weights;  // Sphere: Gauss-Legendre weights on [-1, 1]

  std::size_t size() const { return nodes.size(); }
  double total_weight() const;
};

/// resolution >= 8 per chart dimension. For Sphere, `bands` defaults to
/// resolution / 2.
VelocityGrid make_grid(const VelocityModel& model, std::size_t resolution, std::size_t bands = 0,
                       Quadrature quadrature = Quadrature::Default);

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

/// Built-in fixtures: flat-interval, drift-interval, sphere-rotor.
VelocityModel builtin_model(const std::string& name);
std::vector<std::string> builtin_model_names();

}  // namespace kld
