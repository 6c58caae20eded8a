#include "kld/cli.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "kld/csv.hpp"
#include "kld/parallel.hpp"
#include "kld/flow.hpp"
#include "kld/hjsolver.hpp"
#include "kld/kinetic.hpp"
#include "kld/pdmp.hpp"
#include "kld/stationary.hpp"

namespace kld {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> indexed(const std::string& stem, int d) {
  if (d == 1) return {stem};
  std::vector<std::string> out;
  for (int k = 1; k <= d; ++k) out.push_back(stem + std::to_string(k));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

struct Context {
  const RunConfig& cfg;
  fs::path out;
  DispatchOptions options;
  VelocityModel model;

  VelocityGrid grid(std::size_t nv) const {
    return make_grid(model, nv, model.kind() == ManifoldKind::Sphere ? cfg.grid.bands : 0, cfg.grid.quadrature);
  }
  VelocityGrid grid() const { return grid(cfg.grid.nv); }
  SpaceGrid space() const { return {cfg.grid.nx, cfg.grid.L}; }
};

void require_valid(const Context& c) {
  const auto r = validate(c.model, std::max<std::size_t>(c.cfg.grid.nv, 256));
  if (r.passed()) return;
  std::string msg = "model '" + c.model.name() + "' fails:";
  if (!r.density_positive) msg += " M not positive (min " + format_number(r.min_density) + ");";
  if (!r.density_normalised) msg += " M not normalised (integral " + format_number(r.density_integral) + ");";
  if (!r.divergence_bound)
    msg += " 1 + div Gamma below alpha (min " + format_number(r.min_one_plus_div) + ");";
  if (!r.boundary_null) msg += " Gamma non-zero at the boundary (" + format_number(r.boundary_force) + ");";
  throw AssumptionViolation(msg);
}

void cmd_validate(const Context& c) {
  const auto r = validate(c.model, std::max<std::size_t>(c.cfg.grid.nv, 256));
  CsvWriter w(c.out / "validate.csv", {"quantity", "value"});
  w.labelled("min_density", r.min_density);
  w.labelled("density_integral", r.density_integral);
  w.labelled("min_one_plus_div", r.min_one_plus_div);
  w.labelled("max_one_plus_div", r.max_one_plus_div);
  w.labelled("alpha", c.model.alpha());
  w.labelled("boundary_force", r.boundary_force);
  w.labelled("density_positive", r.density_positive);
  w.labelled("density_normalised", r.density_normalised);
  w.labelled("divergence_bound", r.divergence_bound);
  w.labelled("boundary_null", r.boundary_null);
  w.labelled("passed", r.passed());
  w.close();
  require_valid(c);
}

std::vector<double> mean_velocity(const StationaryProfile& p, int d) {
  std::vector<double> m(static_cast<std::size_t>(d), 0.0);
  for (std::size_t i = 0; i < p.grid.size(); ++i)
    for (int k = 0; k < d; ++k) m[k] += p.grid.weights[i] * p.values[i] * p.grid.vectors[i][k];
  return m;
}

void cmd_stationary(const Context& c) {
  require_valid(c);
  const auto prof = solve_stationary(c.model, c.grid());
  const int d = c.model.dim();
  std::vector<std::string> chart;
  switch (c.model.kind()) {
    case ManifoldKind::Interval: chart = {"v"}; break;
    case ManifoldKind::Ring: chart = {"theta"}; break;
    case ManifoldKind::Sphere: chart = {"theta", "phi"}; break;
  }
  CsvWriter w(c.out / "stationary.csv",
              concat(concat(chart, d == 1 ? std::vector<std::string>{} : indexed("v", d)), {"weight", "M", "M_tilde"}));
  for (std::size_t i = 0; i < prof.grid.size(); ++i) {
    const auto& n = prof.grid.nodes[i];
    std::vector<double> row{n.a};
    if (chart.size() == 2) row.push_back(n.b);
    if (d > 1)
      for (int k = 0; k < d; ++k) row.push_back(prof.grid.vectors[i][k]);
    row.insert(row.end(), {prof.grid.weights[i], c.model.density(n), prof.values[i]});
    w.row(row);
  }
  w.close();

  const auto b = check_bounds(prof, c.model);
  CsvWriter s(c.out / "stationary_summary.csv", {"quantity", "value"});
  s.labelled("mass", b.mass);
  s.labelled("min", b.min);
  s.labelled("max", b.max);
  s.labelled("upper_bound", b.upper_bound);
  const auto mv = mean_velocity(prof, d);
  for (int k = 0; k < d; ++k) s.labelled(d == 1 ? "mean_v" : "mean_v" + std::to_string(k + 1), mv[k]);
  s.labelled("bounds_ok", b.ok());
  s.close();
  if (!b.ok())
    throw AssumptionViolation("stationary profile violates its bounds (mass " + format_number(b.mass) + ", min " +
                              format_number(b.min) + ", max " + format_number(b.max) + " > " +
                              format_number(b.upper_bound) + ")");
}

struct TableBundle {
  StationaryProfile profile;
  std::unique_ptr<HamiltonianSolver> solver;
  HamiltonianTable table;
};

// The space line follows the first embedding axis, so in dimension d > 1
// the 1-D Hamiltonian is H(p e1).
std::unique_ptr<TableBundle> line_table(const Context& c) {
  auto b = std::make_unique<TableBundle>();
  b->profile = solve_stationary(c.model, c.grid());
  b->solver = std::make_unique<HamiltonianSolver>(c.model, b->profile, c.cfg.hamiltonian.controls);
  const auto axes = c.cfg.table_axes(1);
  if (c.model.dim() == 1) {
    b->table = build_table(*b->solver, axes);
    return b;
  }
  HamiltonianTable& t = b->table;
  t.axes = axes;
  const std::size_t n = axes[0].steps;
  t.p.resize(n);
  t.H.resize(n);
  t.H_crit.resize(n);
  t.residual.resize(n);
  t.singular.resize(n);
  for (std::size_t k = 0; k < n; ++k) t.p[k] = {axes[0].at(k)};
  parallel_for(n, [&](std::size_t k) {
    const std::vector<double> p{axes[0].at(k), 0.0, 0.0};
    const auto sol = b->solver->solve(std::span<const double>(p.data(), static_cast<std::size_t>(c.model.dim())));
    t.H[k] = sol.H;
    t.H_crit[k] = sol.H_crit;
    t.residual[k] = sol.integral - 1.0;
    t.singular[k] = sol.singular;
  });
  t.lipschitz = table_lipschitz(t);
  return b;
}

std::unique_ptr<TableBundle> full_table(const Context& c) {
  auto b = std::make_unique<TableBundle>();
  b->profile = solve_stationary(c.model, c.grid());
  b->solver = std::make_unique<HamiltonianSolver>(c.model, b->profile, c.cfg.hamiltonian.controls);
  b->table = build_table(*b->solver, c.cfg.table_axes(c.model.dim()));
  return b;
}

void check_lipschitz(const HamiltonianTable& t, double max_speed) {
  if (t.lipschitz > max_speed * (1.0 + 1e-6))
    throw AssumptionViolation("table slope " + format_number(t.lipschitz) + " exceeds max |v| = " +
                              format_number(max_speed));
}

void cmd_hamiltonian(const Context& c) {
  require_valid(c);
  const auto b = full_table(c);
  const auto& t = b->table;
  const int d = static_cast<int>(t.dim());
  CsvWriter w(c.out / "hamiltonian.csv", concat(indexed("p", d), {"H", "H_crit", "residual", "singular"}));
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::vector<double> row = t.p[k];
    row.insert(row.end(), {t.H[k], t.H_crit[k], t.residual[k], static_cast<double>(t.singular[k])});
    w.row(row);
  }
  w.close();
  double worst = 0.0;
  std::size_t singular = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!t.singular[k]) worst = std::max(worst, std::abs(t.residual[k]));
    singular += t.singular[k];
  }
  CsvWriter s(c.out / "hamiltonian_summary.csv", {"quantity", "value"});
  s.labelled("nodes", static_cast<double>(t.size()));
  s.labelled("singular_nodes", static_cast<double>(singular));
  s.labelled("max_abs_residual", worst);
  s.labelled("lipschitz", t.lipschitz);
  s.labelled("max_speed", c.model.max_speed());
  s.labelled("convex", table_convex(t));
  s.close();
  check_lipschitz(t, c.model.max_speed());
}

std::vector<std::vector<double>> rate_points(std::size_t per_axis, int d) {
  std::vector<std::vector<double>> xs;
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  const double h = 2.0 / static_cast<double>(per_axis - 1);
  for (;;) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) x[k] = -1.0 + h * static_cast<double>(idx[k]);
    xs.push_back(std::move(x));
    int k = d - 1;
    while (k >= 0 && ++idx[k] == per_axis) idx[k--] = 0;
    if (k < 0) break;
  }
  return xs;
}

RateTable rate_for(const Context& c, const HamiltonianTable& t) {
  const auto n = c.cfg.hamiltonian.x_points;
  return n == 0 ? legendre_transform(t) : legendre_transform(t, rate_points(n, static_cast<int>(t.dim())));
}

void cmd_legendre(const Context& c) {
  require_valid(c);
  const auto b = full_table(c);
  const auto& t = b->table;
  if (!table_convex(t)) std::fprintf(stderr, "kld: warning: H table is not convex; L is the transform of its hull\n");
  const auto rate = rate_for(c, t);
  const int d = static_cast<int>(t.dim());
  CsvWriter w(c.out / "legendre.csv", concat(concat(indexed("x", d), {"L"}), concat(indexed("p", d), {"boundary"})));
  for (std::size_t k = 0; k < rate.x.size(); ++k) {
    std::vector<double> row = rate.x[k];
    row.push_back(rate.L[k]);
    row.insert(row.end(), rate.argmax_p[k].begin(), rate.argmax_p[k].end());
    row.push_back(rate.boundary[k]);
    w.row(row);
  }
  w.close();
}

HJResult run_hj(const Context& c, const HamiltonianTable& table, const std::vector<double>& snapshots) {
  const auto phi0 = sample_initial(c.cfg.kinetic.phi0, c.space());
  return solve_hj(phi0, table, c.cfg.hj.T, c.space(), c.cfg.hj.dt, c.cfg.hj.alpha, snapshots);
}

void cmd_hj(const Context& c) {
  require_valid(c);
  const auto b = line_table(c);
  check_lipschitz(b->table, c.model.max_speed());
  const auto res = run_hj(c, b->table, c.cfg.hj.snapshots);
  const auto space = c.space();
  CsvWriter w(c.out / "hj.csv", {"t", "x", "phi"});
  for (const auto& snap : res.snapshots)
    for (std::size_t j = 0; j < space.nx; ++j) w.row({snap.t, space.x(j), snap.phi[j]});
  w.close();

  if (!table_convex(b->table)) {
    std::fprintf(stderr, "kld: note: H table is not convex; skipping the Hopf-Lax reference\n");
    return;
  }
  const auto rate = c.cfg.hamiltonian.x_points == 0 ? legendre_transform(b->table, rate_points(2001, 1))
                                                      : rate_for(c, b->table);
  const expr::Program prog(c.cfg.kinetic.phi0, {"x", "L"});
  const double L = space.L;
  const auto ref = hopf_lax_oracle([&](double x) { return prog(x, L); }, b->table, rate, c.cfg.hj.T, space);
  CsvWriter o(c.out / "hj_hopf_lax.csv", {"x", "phi", "phi_hopf_lax"});
  for (std::size_t j = 0; j < space.nx; ++j) o.row({space.x(j), res.field.phi[j], ref[j]});
  o.close();
}

StationaryProfile kinetic_profile(const Context& c) {
  const std::size_t nv = c.cfg.kinetic.nv ? c.cfg.kinetic.nv : c.cfg.grid.nv;
  return solve_stationary(c.model, c.grid(nv));
}

KineticRun run_one_kinetic(const Context& c, const StationaryProfile& prof, double eps) {
  KineticConfig kc;
  kc.eps = eps;
  kc.T = c.cfg.kinetic.T;
  kc.dt = c.cfg.kinetic.dt;
  kc.space = c.space();
  kc.snapshot_times = c.cfg.kinetic.snapshots;
  return run_kinetic(c.model, prof, c.cfg.kinetic.phi0, kc);
}

void cmd_kinetic(const Context& c) {
  require_valid(c);
  const auto prof = kinetic_profile(c);
  CsvWriter w(c.out / "kinetic.csv", {"eps", "t", "x", "phi_mean", "phi_min", "phi_max"});
  CsvWriter diag(c.out / "kinetic_diagnostics.csv",
                 {"eps", "t", "mass", "min_f", "min_phi", "max_phi", "bound", "margin"});
  std::string failures;
  for (double eps : c.cfg.kinetic.eps) {
    const auto run = run_one_kinetic(c, prof, eps);
    for (const auto& snap : run.snapshots)
      for (std::size_t j = 0; j < snap.space.nx; ++j) {
        double lo = snap.at(j, 0), hi = lo;
        for (std::size_t i = 1; i < snap.grid.size(); ++i) {
          lo = std::min(lo, snap.at(j, i));
          hi = std::max(hi, snap.at(j, i));
        }
        w.row({eps, snap.t, snap.space.x(j), snap.velocity_mean(j), lo, hi});
      }
    for (const auto& d : run.diagnostics)
      diag.row({eps, d.t, d.mass, d.min_f, d.min_phi, d.max_phi, d.bound, d.margin});
    if (!run.bounds_ok) failures += " eps=" + format_number(eps);
  }
  w.close();
  diag.close();
  if (!failures.empty()) throw AssumptionViolation("a priori bounds on phi violated for" + failures);
}

void cmd_compare(const Context& c) {
  require_valid(c);
  if (c.cfg.hj.T != c.cfg.kinetic.T) throw std::invalid_argument("compare needs [hj] T equal to [kinetic] T");
  const auto b = line_table(c);
  check_lipschitz(b->table, c.model.max_speed());
  const auto hj = run_hj(c, b->table, {});
  const auto prof = kinetic_profile(c);
  const auto space = c.space();
  CsvWriter w(c.out / "compare.csv", {"eps", "T", "linf_error", "l1_error", "max_spread"});
  CsvWriter prof_out(c.out / "compare_profiles.csv", {"eps", "x", "phi_kinetic", "phi_hj"});
  std::string failures;
  for (double eps : c.cfg.kinetic.eps) {
    const auto run = run_one_kinetic(c, prof, eps);
    const auto& snap = run.snapshots.back();
    double linf = 0.0, l1 = 0.0, spread = 0.0;
    for (std::size_t j = 0; j < space.nx; ++j) {
      const double mean = snap.velocity_mean(j);
      const double e = std::abs(mean - hj.field.phi[j]);
      linf = std::max(linf, e);
      l1 += e * space.dx();
      spread = std::max(spread, snap.velocity_spread(j));
      prof_out.row({eps, space.x(j), mean, hj.field.phi[j]});
    }
    w.row({eps, snap.t, linf, l1, spread});
    if (!run.bounds_ok) failures += " eps=" + format_number(eps);
  }
  w.close();
  prof_out.close();
  if (!failures.empty()) throw AssumptionViolation("a priori bounds on phi violated for" + failures);
}

void cmd_simulate(const Context& c) {
  require_valid(c);
  const int d = c.model.dim();
  auto ps = c.cfg.simulate.p;
  if (ps.empty()) ps.push_back(std::vector<double>(static_cast<std::size_t>(d), 0.0));
  const std::uint64_t seed = c.options.seed.value_or(c.cfg.simulate.seed);
  const auto st = ensemble(c.model, c.cfg.simulate.n, c.cfg.simulate.t_final, ps, seed);
  CsvWriter w(c.out / "simulate.csv", concat(indexed("p", d), {"Lambda", "std_error"}));
  for (const auto& g : st.cgf) {
    std::vector<double> row = g.p;
    row.insert(row.end(), {g.value, g.std_error});
    w.row(row);
  }
  w.close();
  CsvWriter s(c.out / "simulate_summary.csv", {"quantity", "value"});
  s.labelled("n", static_cast<double>(st.n));
  s.labelled("t_final", st.t_final);
  s.labelled("seed", static_cast<double>(seed));
  s.labelled("jumps_per_time", st.jumps_per_time);
  for (int k = 0; k < d; ++k) {
    const std::string sfx = d == 1 ? "" : std::to_string(k + 1);
    s.labelled("mean_velocity" + sfx, st.mean_velocity[k]);
    s.labelled("mean_velocity_se" + sfx, st.mean_velocity_se[k]);
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      s.labelled(d == 1 ? "covariance" : "covariance" + std::to_string(i + 1) + std::to_string(j + 1),
                 st.covariance[i * d + j]);
  s.close();
  if (c.cfg.simulate.endpoints) {
    CsvWriter e(c.out / "endpoints.csv", concat({"seed"}, indexed("x", d)));
    for (std::size_t k = 0; k < st.endpoints.size(); ++k) {
      std::vector<double> row{static_cast<double>(seed + k)};
      for (int i = 0; i < d; ++i) row.push_back(st.endpoints[k][i]);
      e.row(row);
    }
    e.close();
  }
}

const std::map<std::string, std::function<void(const Context&)>>& table() {
  static const std::map<std::string, std::function<void(const Context&)>> t{
      {"validate", cmd_validate}, {"stationary", cmd_stationary}, {"hamiltonian", cmd_hamiltonian},
      {"legendre", cmd_legendre}, {"hj", cmd_hj},                 {"kinetic", cmd_kinetic},
      {"simulate", cmd_simulate}, {"compare", cmd_compare}};
  return t;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"validate", "stationary", "hamiltonian", "legendre",
                                              "hj",       "kinetic",    "simulate",    "compare"};
  return names;
}

void run_subcommand(const std::string& name, const RunConfig& config, const fs::path& out_dir,
                    const DispatchOptions& options) {
  const auto it = table().find(name);
  if (it == table().end()) throw std::invalid_argument("unknown subcommand '" + name + "'");
  fs::create_directories(out_dir);
  const Context ctx{config, out_dir, options, config.build_model()};
  it->second(ctx);
}

int dispatch(const std::string& name, const RunConfig& config, const fs::path& out_dir,
             const DispatchOptions& options) {
  try {
    run_subcommand(name, config, out_dir, options);
    return kExitOk;
  } catch (const AssumptionViolation& e) {
    std::fprintf(stderr, "kld %s: assumption violated: %s\n", name.c_str(), e.what());
    return kExitAssumption;
  } catch (const Unclassified& e) {
    std::fprintf(stderr, "kld %s: assumption violated: %s\n", name.c_str(), e.what());
    return kExitAssumption;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kld %s: error: %s\n", name.c_str(), e.what());
    return kExitInternal;
  }
}

}  // namespace kld
