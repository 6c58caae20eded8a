#include "kld/kinetic.hpp"

#include <algorithm>
#include <cmath>

#include "kld/parallel.hpp"

namespace kld {

double PhaseField::mass() const {
  double s = 0.0;
  const std::size_t n = nv();
  for (std::size_t j = 0; j < space.nx; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += grid.weights[i] * f[j * n + i];
    s += col;
  }
  return s * space.dx();
}

double PhaseField::min() const { return *std::min_element(f.begin(), f.end()); }

double PotentialField::velocity_mean(std::size_t j) const {
  double s = 0.0, w = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    s += grid.weights[i] * at(j, i);
    w += grid.weights[i];
  }
  return s / w;
}

double PotentialField::velocity_spread(std::size_t j) const {
  double lo = at(j, 0), hi = lo;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    lo = std::min(lo, at(j, i));
    hi = std::max(hi, at(j, i));
  }
  return hi - lo;
}

std::vector<double> sample_initial(const expr::Expr& phi0, const SpaceGrid& space) {
  const expr::Program prog(phi0, {"x", "L"});
  std::vector<double> out(space.nx);
  for (std::size_t j = 0; j < space.nx; ++j) {
    out[j] = prog(space.x(j), space.L);
    if (!(out[j] >= 0.0))
      throw KineticError("initial potential is negative at x = " + std::to_string(space.x(j)));
  }
  return out;
}

PhaseField init_well_prepared(const StationaryProfile& profile, const std::vector<double>& phi0, double eps,
                              const SpaceGrid& space) {
  if (!(eps > 0.0)) throw KineticError("eps must be positive");
  if (phi0.size() != space.nx) throw KineticError("initial potential has the wrong length");
  PhaseField f;
  f.eps = eps;
  f.space = space;
  f.grid = profile.grid;
  const std::size_t nv = f.nv();
  f.f.resize(space.nx * nv);
  for (std::size_t j = 0; j < space.nx; ++j) {
    if (!(phi0[j] >= 0.0)) throw KineticError("initial potential is negative at node " + std::to_string(j));
    const double e = std::exp(-phi0[j] / eps);
    for (std::size_t i = 0; i < nv; ++i) f.f[j * nv + i] = profile.values[i] * e;
  }
  return f;
}

PotentialField hopf_cole(const PhaseField& field, const StationaryProfile& profile) {
  const std::size_t nv = field.nv();
  if (profile.values.size() != nv) throw KineticError("profile and field use different velocity grids");
  PotentialField out;
  out.t = field.t;
  out.eps = field.eps;
  out.space = field.space;
  out.grid = field.grid;
  out.phi.resize(field.f.size());
  for (std::size_t j = 0; j < field.space.nx; ++j) {
    for (std::size_t i = 0; i < nv; ++i) {
      const double f = field.f[j * nv + i];
      if (!(f > 0.0))
        throw KineticError("non-positive density f = " + std::to_string(f) + " at x node " + std::to_string(j) +
                           ", velocity node " + std::to_string(i));
      out.phi[j * nv + i] = -field.eps * std::log(f / profile.values[i]);
    }
  }
  return out;
}

double kinetic_cfl_limit(const SpaceGrid& space) { return 0.9 * space.dx(); }

KineticStepper::KineticStepper(const VelocityModel& model, const StationaryProfile& profile, double eps, double dt,
                               const SpaceGrid& space)
    : eps_(eps), dt_(dt), space_(space) {
  const auto& grid = profile.grid;
  if (!(eps > 0.0)) throw KineticError("eps must be positive");
  if (space.nx < 8) throw KineticError("nx below minimum 8");
  if (!(dt > 0.0) || dt > kinetic_cfl_limit(space) * (1.0 + 1e-12))
    throw KineticError("time step " + std::to_string(dt) + " violates dt <= 0.9 dx / max|v| = " +
                       std::to_string(kinetic_cfl_limit(space)));
  const std::size_t nv = grid.size();
  vx_.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) vx_[i] = grid.vectors[i][0];
  weights_ = grid.weights;

  const double k = dt / eps;
  double mass_m = 0.0;
  std::vector<double> m(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    m[i] = model.density(grid.nodes[i]);
    mass_m += grid.weights[i] * m[i];
  }
  source_.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) source_[i] = k * m[i] / mass_m;

  Eigen::SparseMatrix<double> a = velocity_divergence_matrix(model, grid) * k;
  for (std::size_t i = 0; i < nv; ++i) a.coeffRef(static_cast<int>(i), static_cast<int>(i)) += 1.0 + k;
  a.makeCompressed();
  lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
  lu_->compute(a);
  if (lu_->info() != Eigen::Success) throw KineticError("velocity step matrix is singular");
}

void KineticStepper::transport_x(PhaseField& field, double dt) const {
  const std::size_t nx = field.space.nx, nv = field.nv();
  const double before = field.mass();
  const double dx = field.space.dx();
  parallel_for(nv, [&](std::size_t i) {
    const double u = vx_[i] * dt / dx;
    const double m = std::floor(u);
    const double tau = 1.0 - (u - m);
    // Lagrange weights on nodes -1, 0, 1, 2 relative to base node j - m - 1
    const double w0 = -tau * (tau - 1.0) * (tau - 2.0) / 6.0;
    const double w1 = (tau + 1.0) * (tau - 1.0) * (tau - 2.0) / 2.0;
    const double w2 = -(tau + 1.0) * tau * (tau - 2.0) / 2.0;
    const double w3 = (tau + 1.0) * tau * (tau - 1.0) / 6.0;
    const auto n = static_cast<long>(nx);
    const long shift = static_cast<long>(m) + 1;
    std::vector<double> col(nx);
    for (std::size_t j = 0; j < nx; ++j) col[j] = field.f[j * nv + i];
    auto get = [&](long k) { return col[static_cast<std::size_t>(((k % n) + n) % n)]; };
    for (std::size_t j = 0; j < nx; ++j) {
      const long b = static_cast<long>(j) - shift;
      field.f[j * nv + i] = w0 * get(b - 1) + w1 * get(b) + w2 * get(b + 1) + w3 * get(b + 2);
    }
  });
  const double after = field.mass();
  const double scale = before / after;
  for (double& v : field.f) v *= scale;
}

void KineticStepper::velocity_step(PhaseField& field) const {
  const std::size_t nx = field.space.nx, nv = field.nv();
  Eigen::Map<Eigen::MatrixXd> f(field.f.data(), static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nx));
  for (std::size_t j = 0; j < nx; ++j) {
    double rho = 0.0;
    for (std::size_t i = 0; i < nv; ++i) rho += weights_[i] * field.f[j * nv + i];
    for (std::size_t i = 0; i < nv; ++i) field.f[j * nv + i] += source_[i] * rho;
  }
  Eigen::MatrixXd rhs = f;
  f = lu_->solve(rhs);
}

void KineticStepper::step(PhaseField& field) const {
  transport_x(field, 0.5 * dt_);
  velocity_step(field);
  transport_x(field, 0.5 * dt_);
  field.t += dt_;
}

KineticRun run_kinetic(const VelocityModel& model, const StationaryProfile& profile, const expr::Expr& phi0,
                       const KineticConfig& config) {
  if (!(config.T > 0.0)) throw KineticError("T must be positive");
  const double limit = kinetic_cfl_limit(config.space);
  const double dt_req = config.dt > 0.0 ? config.dt : limit;
  if (dt_req > limit * (1.0 + 1e-12))
    throw KineticError("time step " + std::to_string(dt_req) + " violates dt <= 0.9 dx / max|v| = " +
                       std::to_string(limit));
  const auto steps = static_cast<std::size_t>(std::ceil(config.T / dt_req - 1e-9));
  const double dt = config.T / static_cast<double>(steps);
  const KineticStepper stepper(model, profile, config.eps, dt, config.space);

  const auto phi_init = sample_initial(phi0, config.space);
  const double phi0_max = *std::max_element(phi_init.begin(), phi_init.end());
  double max_m = 0.0;
  for (const auto& c : profile.grid.nodes) max_m = std::max(max_m, model.density(c));
  const double growth = max_m / profile.min();

  KineticRun run;
  PhaseField field = init_well_prepared(profile, phi_init, config.eps, config.space);

  std::vector<std::size_t> snap_steps;
  for (double t : config.snapshot_times)
    if (t >= 0.0 && t <= config.T) snap_steps.push_back(static_cast<std::size_t>(std::llround(t / dt)));
  snap_steps.push_back(steps);
  std::sort(snap_steps.begin(), snap_steps.end());
  snap_steps.erase(std::unique(snap_steps.begin(), snap_steps.end()), snap_steps.end());

  auto record = [&](std::size_t k) {
    const PotentialField pot = hopf_cole(field, profile);
    KineticDiagnostics d;
    d.t = field.t;
    d.mass = field.mass();
    d.min_f = field.min();
    d.min_phi = *std::min_element(pot.phi.begin(), pot.phi.end());
    d.max_phi = *std::max_element(pot.phi.begin(), pot.phi.end());
    d.bound = phi0_max + growth * field.t;
    d.margin = std::min(d.min_phi, d.bound - d.max_phi);
    if (d.margin < -kBoundSlack) run.bounds_ok = false;
    run.diagnostics.push_back(d);
    if (std::binary_search(snap_steps.begin(), snap_steps.end(), k)) run.snapshots.push_back(pot);
  };
  record(0);
  for (std::size_t k = 1; k <= steps; ++k) {
    stepper.step(field);
    field.t = static_cast<double>(k) * dt;
    record(k);
  }
  run.final_field = std::move(field);
  return run;
}

}  // namespace kld
