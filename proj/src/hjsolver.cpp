#include "kld/hjsolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kld/parallel.hpp"

namespace kld {

ScalarField1D lf_step(const ScalarField1D& field, const HamiltonianTable& table, double dt, double alpha) {
  if (table.dim() != 1) throw HJError("the Hamilton-Jacobi solver needs a one-dimensional Hamiltonian table");
  const std::size_t n = field.space.nx;
  const double dx = field.space.dx();
  if (alpha < table.lipschitz * (1.0 - 1e-9))
    throw HJError("alpha = " + std::to_string(alpha) + " is below the table Lipschitz bound " +
                  std::to_string(table.lipschitz));
  if (dt > dx / (2.0 * alpha) * (1.0 + 1e-12))
    throw HJError("time step " + std::to_string(dt) + " violates dt <= dx / (2 alpha) = " +
                  std::to_string(dx / (2.0 * alpha)));
  const double pmin = table.axes[0].min, pmax = table.axes[0].max;
  ScalarField1D out = field;
  std::vector<unsigned char> clamped(n, 0);
  parallel_for(n, [&](std::size_t j) {
    const double left = field.phi[(j + n - 1) % n], mid = field.phi[j], right = field.phi[(j + 1) % n];
    const double dm = (mid - left) / dx, dp = (right - mid) / dx;
    const double p = 0.5 * (dm + dp);
    if (p < pmin || p > pmax) clamped[j] = 1;
    const double q[1] = {std::clamp(p, pmin, pmax)};
    out.phi[j] = mid - dt * (table.query(q) - 0.5 * alpha * (dp - dm));
  });
  for (unsigned char c : clamped) out.clamped += c;
  out.t = field.t + dt;
  return out;
}

HJResult solve_hj(const std::vector<double>& phi0, const HamiltonianTable& table, double T, const SpaceGrid& space,
                  double dt, double alpha, const std::vector<double>& snapshot_times) {
  if (phi0.size() != space.nx) throw HJError("initial data has the wrong length");
  if (space.nx < 8) throw HJError("nx below minimum 8");
  if (!(T >= 0.0)) throw HJError("T must be non-negative");
  const double limit = space.dx() / (2.0 * alpha);
  const double dt_req = dt > 0.0 ? dt : limit;
  if (dt_req > limit * (1.0 + 1e-12))
    throw HJError("time step " + std::to_string(dt_req) + " violates dt <= dx / (2 alpha) = " + std::to_string(limit));
  const auto steps = T > 0.0 ? static_cast<std::size_t>(std::ceil(T / dt_req - 1e-9)) : 0;
  const double h = steps > 0 ? T / static_cast<double>(steps) : 0.0;

  std::vector<std::size_t> snaps;
  for (double t : snapshot_times)
    if (t >= 0.0 && t <= T) snaps.push_back(h > 0.0 ? static_cast<std::size_t>(std::llround(t / h)) : 0);
  snaps.push_back(steps);
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());

  HJResult res;
  ScalarField1D f{0.0, space, phi0, 0};
  if (snaps.front() == 0) res.snapshots.push_back(f);
  for (std::size_t k = 1; k <= steps; ++k) {
    f = lf_step(f, table, h, alpha);
    f.t = static_cast<double>(k) * h;
    if (std::binary_search(snaps.begin(), snaps.end(), k)) res.snapshots.push_back(f);
  }
  res.field = f;
  return res;
}

std::vector<double> hopf_lax_oracle(const std::function<double(double)>& phi0, const HamiltonianTable& table,
                                    const RateTable& rate, double t, const SpaceGrid& space) {
  if (table.dim() != 1 || rate.x.empty() || rate.x.front().size() != 1)
    throw HJError("the Hopf-Lax oracle needs one-dimensional tables");
  if (!table_convex(table)) throw HJError("Hamiltonian table is not convex; the Hopf-Lax formula does not apply");
  const std::size_t n = space.nx;
  std::vector<double> out(n);
  if (t <= 0.0) {
    for (std::size_t j = 0; j < n; ++j) out[j] = phi0(space.x(j));
    return out;
  }
  std::vector<double> zs(rate.x.size());
  for (std::size_t m = 0; m < zs.size(); ++m) zs[m] = rate.x[m][0];
  if (!std::is_sorted(zs.begin(), zs.end())) throw HJError("rate table x grid must be increasing");
  auto L = [&](double z) {
    if (z < zs.front() || z > zs.back()) return std::numeric_limits<double>::infinity();
    const auto it = std::upper_bound(zs.begin(), zs.end(), z);
    if (it == zs.end()) return rate.L.back();
    const auto k = static_cast<std::size_t>(it - zs.begin());
    const double s = (z - zs[k - 1]) / (zs[k] - zs[k - 1]);
    return (1.0 - s) * rate.L[k - 1] + s * rate.L[k];
  };
  const std::size_t ny = 4 * n;
  const double dy = space.L / static_cast<double>(ny);
  std::vector<double> y0(ny);
  for (std::size_t k = 0; k < ny; ++k) y0[k] = phi0(static_cast<double>(k) * dy);
  parallel_for(n, [&](std::size_t j) {
    const double x = space.x(j);
    double best = std::numeric_limits<double>::infinity();
    for (int image = -1; image <= 1; ++image) {
      for (std::size_t k = 0; k < ny; ++k) {
        const double y = static_cast<double>(k) * dy + image * space.L;
        const double v = y0[k] + t * L((x - y) / t);
        best = std::min(best, v);
      }
    }
    out[j] = best;
  });
  return out;
}

}  // namespace kld
