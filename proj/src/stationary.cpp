#include "kld/stationary.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kld {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Triplets = std::vector<Eigen::Triplet<double>>;

// Adds the upwind flux through one face between cells `left` and `right`
// (speed > 0 means transport from left to right). Each cell's balance is
// divided by its chart length.
void add_face(Triplets& t, int left, int right, double speed, double face_size, double len_left,
              double len_right) {
  const int up = speed > 0.0 ? left : right;
  const double flux = speed * face_size;
  t.emplace_back(left, up, flux / len_left);
  t.emplace_back(right, up, -flux / len_right);
}

}  // namespace

double StationaryProfile::value_at(const ChartPoint& c) const {
  switch (grid.kind) {
    case ManifoldKind::Interval: {
      const auto& x = grid.nodes;
      if (c.a <= x.front().a) return values.front();
      if (c.a >= x.back().a) return values.back();
      const auto it = std::upper_bound(x.begin(), x.end(), c.a,
                                       [](double v, const ChartPoint& node) { return v < node.a; });
      const auto k = static_cast<std::size_t>(it - x.begin());
      const double s = (c.a - x[k - 1].a) / (x[k].a - x[k - 1].a);
      return (1.0 - s) * values[k - 1] + s * values[k];
    }
    case ManifoldKind::Ring: {
      const double n = static_cast<double>(grid.n_theta);
      double u = std::fmod(c.a, kTwoPi) / kTwoPi * n;
      if (u < 0.0) u += n;
      const auto i0 = static_cast<std::size_t>(std::floor(u)) % grid.n_theta;
      const std::size_t i1 = (i0 + 1) % grid.n_theta;
      const double s = u - std::floor(u);
      return (1.0 - s) * values[i0] + s * values[i1];
    }
    case ManifoldKind::Sphere: {
      const std::size_t nt = grid.n_theta;
      const double n = static_cast<double>(nt);
      double u = std::fmod(c.a, kTwoPi) / kTwoPi * n;
      if (u < 0.0) u += n;
      const auto i0 = static_cast<std::size_t>(std::floor(u)) % nt;
      const std::size_t i1 = (i0 + 1) % nt;
      const double s = u - std::floor(u);
      const double mu = std::cos(c.b);
      std::size_t j0 = 0, j1 = 0;
      double r = 0.0;
      if (mu <= grid.mu.front()) {
        j0 = j1 = 0;
      } else if (mu >= grid.mu.back()) {
        j0 = j1 = grid.n_band - 1;
      } else {
        const auto it = std::upper_bound(grid.mu.begin(), grid.mu.end(), mu);
        j1 = static_cast<std::size_t>(it - grid.mu.begin());
        j0 = j1 - 1;
        r = (mu - grid.mu[j0]) / (grid.mu[j1] - grid.mu[j0]);
      }
      auto at = [&](std::size_t i, std::size_t j) { return values[j * nt + i]; };
      const double lo = (1.0 - s) * at(i0, j0) + s * at(i1, j0);
      const double hi = (1.0 - s) * at(i0, j1) + s * at(i1, j1);
      return (1.0 - r) * lo + r * hi;
    }
  }
  return 0.0;
}

double StationaryProfile::mass() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += grid.weights[i] * values[i];
  return s;
}

double StationaryProfile::min() const { return *std::min_element(values.begin(), values.end()); }
double StationaryProfile::max() const { return *std::max_element(values.begin(), values.end()); }

Eigen::SparseMatrix<double> velocity_divergence_matrix(const VelocityModel& model, const VelocityGrid& grid) {
  const std::size_t n = grid.size();
  Triplets t;
  switch (grid.kind) {
    case ManifoldKind::Interval: {
      // cell i spans [b_i, b_{i+1}] with b_{i+1} - b_i = w_i
      double boundary = -1.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        boundary += grid.weights[i];
        const double speed = model.force({boundary, 0.0})[0];
        add_face(t, static_cast<int>(i), static_cast<int>(i + 1), speed, 1.0, grid.weights[i], grid.weights[i + 1]);
      }
      break;
    }
    case ManifoldKind::Ring: {
      const double h = kTwoPi / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double face = grid.nodes[i].a + 0.5 * h;
        const double speed = model.force({face, 0.0})[0];
        add_face(t, static_cast<int>(i), static_cast<int>((i + 1) % n), speed, 1.0, h, h);
      }
      break;
    }
    case ManifoldKind::Sphere: {
      const std::size_t nt = grid.n_theta;
      const std::size_t nb = grid.n_band;
      const double h = kTwoPi / static_cast<double>(nt);
      auto idx = [nt](std::size_t i, std::size_t j) { return static_cast<int>(j * nt + i); };
      double boundary = -1.0;
      for (std::size_t j = 0; j < nb; ++j) {
        const double mu = grid.mu[j];
        const double phi = std::acos(mu);
        const double sp = std::sin(phi);
        for (std::size_t i = 0; i < nt; ++i) {
          // theta face: theta' = a / sin(phi), face length w_j in mu
          const double theta_face = grid.nodes[idx(i, j)].a + 0.5 * h;
          const double speed = model.force({theta_face, phi})[0] / sp;
          add_face(t, idx(i, j), idx((i + 1) % nt, j), speed, grid.mu_weights[j], h * grid.mu_weights[j],
                   h * grid.mu_weights[j]);
        }
        if (j + 1 < nb) {
          boundary += grid.mu_weights[j];
          const double phi_b = std::acos(std::clamp(boundary, -1.0, 1.0));
          for (std::size_t i = 0; i < nt; ++i) {
            // mu face: mu' = -sin(phi) b, face length h in theta
            const double speed = -std::sin(phi_b) * model.force({grid.nodes[idx(i, j)].a, phi_b})[1];
            add_face(t, idx(i, j), idx(i, j + 1), speed, h, h * grid.mu_weights[j], h * grid.mu_weights[j + 1]);
          }
        }
      }
      break;
    }
  }
  Eigen::SparseMatrix<double> d(static_cast<int>(n), static_cast<int>(n));
  d.setFromTriplets(t.begin(), t.end());
  d.makeCompressed();
  return d;
}

StationaryProfile solve_stationary(const VelocityModel& model, const VelocityGrid& grid) {
  StationaryProfile out;
  out.grid = grid;
  const std::size_t n = grid.size();
  std::vector<double> rhs(n);
  double max_force = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = model.density(grid.nodes[i]);
    max_force = std::max(max_force, model.force_norm(grid.nodes[i]));
  }
  if (model.force_vanishes() || max_force <= 1e-14) {
    out.values = rhs;
  } else {
    Eigen::SparseMatrix<double> a = velocity_divergence_matrix(model, grid);
    for (std::size_t i = 0; i < n; ++i) a.coeffRef(static_cast<int>(i), static_cast<int>(i)) += 1.0;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
      throw StationaryError("stationary system is singular; the velocity grid is too coarse for this force");
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd m = lu.solve(b);
    if (lu.info() != Eigen::Success) throw StationaryError("stationary solve failed");
    out.values.assign(m.data(), m.data() + n);
  }

  const auto worst = std::min_element(out.values.begin(), out.values.end());
  if (!(*worst > 0.0)) {
    const auto k = static_cast<std::size_t>(worst - out.values.begin());
    throw StationaryError("stationary profile is not positive: m = " + std::to_string(*worst) + " at node " +
                          std::to_string(k));
  }
  // the discrete quadrature of M need not be exactly 1
  const double mass = out.mass();
  for (double& v : out.values) v /= mass;
  return out;
}

double ratio(const StationaryProfile& profile, const VelocityModel& model, const ChartPoint& c) {
  return model.density(c) / profile.value_at(c);
}

StationaryBounds check_bounds(const StationaryProfile& profile, const VelocityModel& model, double mass_tol,
                              double bound_slack) {
  StationaryBounds b;
  b.mass = profile.mass();
  b.min = profile.min();
  b.max = profile.max();
  double max_density = 0.0;
  for (const auto& c : profile.grid.nodes) max_density = std::max(max_density, model.density(c));
  b.upper_bound = max_density / model.alpha();
  b.mass_ok = std::abs(b.mass - 1.0) <= mass_tol;
  b.positive = b.min > 0.0;
  b.below_upper = b.max <= b.upper_bound + bound_slack;
  return b;
}

}  // namespace kld
