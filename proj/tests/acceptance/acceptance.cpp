// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kld/expr.hpp"
#include "kld/hamiltonian.hpp"
#include "kld/hjsolver.hpp"
#include "kld/kinetic.hpp"
#include "kld/parallel.hpp"
#include "kld/pdmp.hpp"
#include "kld/stationary.hpp"
#include "random_expr.hpp"

using namespace kld;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Everything later criteria audit: stationary solves, tables, kinetic runs.
struct Ledger {
  std::vector<std::pair<std::string, StationaryBounds>> solves;
  std::vector<std::pair<std::string, double>> table_slopes;
  struct Run {
    std::string label;
    bool bounds_ok;
    double worst_margin;
    std::size_t checks;
  };
  std::vector<Run> runs;
} ledger;

StationaryProfile stationary(const VelocityModel& m, const VelocityGrid& g, const std::string& label) {
  auto prof = solve_stationary(m, g);
  ledger.solves.emplace_back(label, check_bounds(prof, m));
  return prof;
}

HamiltonianTable table(const HamiltonianSolver& s, const std::vector<Axis>& axes, const std::string& label) {
  auto t = build_table(s, axes);
  ledger.table_slopes.emplace_back(label, t.lipschitz);
  return t;
}

KineticRun kinetic(const VelocityModel& m, const StationaryProfile& prof, const expr::Expr& phi0,
                   const KineticConfig& cfg, const std::string& label) {
  auto run = run_kinetic(m, prof, phi0, cfg);
  double worst = kDivergent;
  for (const auto& d : run.diagnostics) worst = std::min(worst, d.margin);
  ledger.runs.push_back({label, run.bounds_ok, worst, run.diagnostics.size()});
  return run;
}

const expr::Expr& bump() {
  static const expr::Expr e = expr::parse("0.5*(1-cos(2*pi*x/L))", {"x", "L"});
  return e;
}

// A fixture with its solver at one resolution. Heap members keep the
// solver's pointers valid when a Setup is moved.
struct Setup {
  std::unique_ptr<VelocityModel> model;
  std::unique_ptr<StationaryProfile> profile;
  std::unique_ptr<HamiltonianSolver> solver;

  Setup(const std::string& name, std::size_t n, Quadrature q = Quadrature::Default)
      : model(std::make_unique<VelocityModel>(builtin_model(name))),
        profile(std::make_unique<StationaryProfile>(
            stationary(*model, make_grid(*model, n, 0, q), name + " n=" + std::to_string(n)))),
        solver(std::make_unique<HamiltonianSolver>(*model, *profile)) {}
};

double flat_closed_form(double p) { return p == 0.0 ? 0.0 : p / std::tanh(p) - 1.0; }

Outcome c1() {
  const std::size_t saved = thread_count();
  set_thread_count(1);
  const auto t0 = std::chrono::steady_clock::now();
  Setup s("flat-interval", 512, Quadrature::GaussLegendre);
  double worst = 0.0;
  for (int k = -50; k <= 50; ++k) {
    const double p = 0.1 * k;
    const std::vector<double> pv{p};
    worst = std::max(worst, std::abs(s.solver->solve(pv).H - flat_closed_form(p)));
  }
  const double secs = seconds_since(t0);
  set_thread_count(saved);
  return {worst <= 1e-6 && secs <= 10.0,
          fmt("flat-interval max |H - (p/tanh p - 1)| = %.3g over 101 p (tol 1e-6), %.2f s single-threaded (limit 10 s)",
              worst, secs)};
}

Outcome c2() {
  double worst = 0.0;
  std::string parts;
  for (const auto& [name, n] : std::vector<std::pair<std::string, std::size_t>>{
           {"flat-interval", 512}, {"drift-interval", 512}, {"sphere-rotor", 64}}) {
    Setup s(name, n);
    const std::vector<double> zero(s.solver->dim(), 0.0);
    const double h = std::abs(s.solver->solve(zero).H);
    worst = std::max(worst, h);
    parts += fmt(" %s %.2g;", name.c_str(), h);
  }
  return {worst <= 1e-8, "|H(0)|:" + parts + " (tol 1e-8)"};
}

Outcome c3() {
  Setup s("sphere-rotor", 32);
  int found = 0;
  double worst = 0.0, first = 0.0, last = 0.0;
  for (double c = 1.0; c <= 60.0 && found < 20; c += 0.5) {
    const std::vector<double> p{0.0, 0.0, c};
    const auto sol = s.solver->solve(p);
    if (!sol.singular) continue;
    if (found == 0) first = c;
    last = c;
    ++found;
    worst = std::max(worst, std::abs(sol.H - (c - 1.0)));
  }
  return {found == 20 && worst <= 1e-4,
          fmt("sphere-rotor p = c e3: %d singular c in [%g, %g], max |H - (c - 1)| = %.3g (tol 1e-4)", found, first, last,
              worst)};
}

Outcome c4() {
  struct Pair {
    std::string name;
    Setup coarse, fine;
  };
  std::vector<Pair> fixtures;
  // Gauss-Legendre nodes resolve the boundary layer of Q at a repelling endpoint
  const auto gl = Quadrature::GaussLegendre;
  fixtures.push_back({"flat-interval", Setup("flat-interval", 512, gl), Setup("flat-interval", 1024, gl)});
  fixtures.push_back({"drift-interval", Setup("drift-interval", 512, gl), Setup("drift-interval", 1024, gl)});
  fixtures.push_back({"sphere-rotor", Setup("sphere-rotor", 64), Setup("sphere-rotor", 128)});
  std::mt19937_64 rng(4);
  auto draw = [&](int which) {
    auto u = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
    if (which == 0) return std::vector<double>{u(-5.0, 5.0)};
    if (which == 1) return std::vector<double>{u(-2.0, 0.3)};
    return std::vector<double>{u(-1.2, 1.2), u(-1.2, 1.2), u(-1.2, 1.2)};
  };
  double worst_i = 0.0, worst_r = 0.0;
  int failures = 0, tested = 0;
  std::string first_failure;
  while (tested < 50) {
    const int which = tested % 3;
    auto& f = fixtures[which];
    const auto p = draw(which);
    const auto a = f.coarse.solver->solve(p);
    if (a.singular) continue;
    const auto b = f.fine.solver->solve(p);
    ++tested;
    const double di = std::abs(a.integral - 1.0);
    const double ra = f.coarse.solver->eigen_residual(a);
    const double rb = b.singular ? kDivergent : f.fine.solver->eigen_residual(b);
    const bool decreasing = rb < ra || (ra < 1e-10 && rb < 1e-10);
    worst_i = std::max(worst_i, di);
    worst_r = std::max(worst_r, ra);
    if (!(di <= 1e-8 && ra <= 1e-4 && decreasing)) {
      if (failures++ == 0)
        first_failure = fmt(" first failure %s p0=%g: |I-1|=%.3g res=%.3g -> %.3g;", f.name.c_str(), p[0], di, ra, rb);
    }
  }
  return {failures == 0,
          fmt("50 random non-singular p: max |I - 1| = %.3g (tol 1e-8), max residual = %.3g (tol 1e-4), %d failed "
              "(incl. refinement check);",
              worst_i, worst_r, failures) +
              first_failure};
}

Outcome c5() {
  std::vector<Setup> fixtures;
  fixtures.emplace_back("flat-interval", 256);
  fixtures.emplace_back("drift-interval", 256);
  fixtures.emplace_back("sphere-rotor", 32);
  std::mt19937_64 rng(5);
  int violations = 0;
  double worst = -kDivergent;
  for (int k = 0; k < 20; ++k) {
    auto& f = fixtures[k % 3];
    std::vector<double> p(f.solver->dim());
    for (double& x : p) x = -2.0 + 4.0 * uniform01(rng);
    const auto sol = f.solver->solve(p);
    const double lo = sol.H_crit + 0.5 * (sol.H - sol.H_crit) + 1e-6;
    const double hi = sol.H + 2.0;
    double prev = kDivergent;
    for (int j = 0; j < 20; ++j) {
      const double h = lo + (hi - lo) * j / 19.0;
      const double i = f.solver->normalization_integral(p, h);
      if (j > 0 && std::isfinite(prev)) {
        worst = std::max(worst, i - prev);
        if (!(i < prev + 1e-12)) ++violations;
      } else if (j > 0 && std::isinf(prev) && std::isinf(i)) {
        // both divergent: no ordering information, not a violation
      }
      prev = i;
    }
  }
  return {violations == 0, fmt("20 random p x 20-point H chains: %d violations, largest step I(H_k+1) - I(H_k) = %.3g",
                               violations, worst)};
}

Outcome c6() {
  {
    // the interval tables come from criteria 10, 11 and 13; add one on the sphere
    Setup s("sphere-rotor", 32);
    table(*s.solver, std::vector<Axis>(3, Axis{-2.0, 2.0, 5}), "sphere-rotor [-2, 2]^3 x 125");
  }
  double worst = 0.0;
  std::string which;
  for (const auto& [label, slope] : ledger.table_slopes)
    if (slope >= worst) {
      worst = slope;
      which = label;
    }
  return {!ledger.table_slopes.empty() && worst <= 1.0 + 1e-6,
          fmt("%zu tables, largest adjacent slope %.9f (%s), max |v| = 1 (tol 1e-6 relative)", ledger.table_slopes.size(),
              worst, which.c_str())};
}

Outcome c7() {
  int bad = 0;
  double worst_mass = 0.0, min_min = kDivergent, worst_ratio = 0.0;
  for (const auto& [label, b] : ledger.solves) {
    bad += !b.ok();
    worst_mass = std::max(worst_mass, std::abs(b.mass - 1.0));
    min_min = std::min(min_min, b.min);
    worst_ratio = std::max(worst_ratio, b.max / b.upper_bound);
  }
  return {bad == 0 && !ledger.solves.empty(),
          fmt("%zu solves: max |mass - 1| = %.3g (tol 1e-10), min M~ = %.4g > 0, max M~ / (max M / alpha) = %.6f <= 1",
              ledger.solves.size(), worst_mass, min_min, worst_ratio)};
}

Outcome c8() {
  int bad = 0;
  std::size_t checks = 0;
  double worst = kDivergent;
  for (const auto& r : ledger.runs) {
    bad += !r.bounds_ok;
    checks += r.checks;
    worst = std::min(worst, r.worst_margin);
  }
  return {bad == 0 && !ledger.runs.empty(),
          fmt("%zu kinetic runs, %zu snapshots: 0 <= phi <= |phi0| + (max M / min M~) t, smallest margin %.3g "
              "(slack %.0e)",
              ledger.runs.size(), checks, worst, kBoundSlack)};
}

Outcome c9() {
  double worst = 0.0;
  std::string parts;
  for (const auto& [name, nv] : std::vector<std::pair<std::string, std::size_t>>{
           {"flat-interval", 64}, {"drift-interval", 64}, {"sphere-rotor", 16}}) {
    const auto m = builtin_model(name);
    const auto prof = stationary(m, make_grid(m, nv), name + " kinetic nv=" + std::to_string(nv));
    KineticConfig cfg;
    cfg.eps = 0.2;
    cfg.space = {64, 1.0};
    cfg.dt = kinetic_cfl_limit(cfg.space);
    cfg.T = 1000.0 * cfg.dt;
    const auto run = kinetic(m, prof, bump(), cfg, name + " mass run");
    const double drift = std::abs(run.diagnostics.back().mass / run.diagnostics.front().mass - 1.0);
    worst = std::max(worst, drift);
    parts += fmt(" %s %.2g (%zu steps);", name.c_str(), drift, run.diagnostics.size() - 1);
  }
  return {worst <= 1e-9, "relative mass drift:" + parts + " (tol 1e-9)"};
}

Outcome c10() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = builtin_model("drift-interval");
  const auto fine = stationary(m, make_grid(m, 512), "drift-interval n=512 (HJ table)");
  const HamiltonianSolver solver(m, fine);
  const auto tab = table(solver, {Axis{-3.5, 3.5, 71}}, "drift-interval [-3.5, 3.5] x 71");
  const SpaceGrid space{512, 1.0};
  const auto hj = solve_hj(sample_initial(bump(), space), tab, 0.5, space);

  const auto prof = stationary(m, make_grid(m, 128, 0, Quadrature::Trapezoid), "drift-interval nv=128 kinetic");
  std::vector<double> errs, spreads;
  for (double eps : {0.4, 0.2, 0.1}) {
    KineticConfig cfg;
    cfg.eps = eps;
    cfg.T = 0.5;
    cfg.space = space;
    const auto run = kinetic(m, prof, bump(), cfg, fmt("drift eps=%g", eps));
    const auto& snap = run.snapshots.back();
    double e = 0.0, s = 0.0;
    for (std::size_t j = 0; j < space.nx; ++j) {
      e = std::max(e, std::abs(snap.velocity_mean(j) - hj.field.phi[j]));
      s = std::max(s, snap.velocity_spread(j));
    }
    errs.push_back(e);
    spreads.push_back(s);
  }
  const double secs = seconds_since(t0);
  const bool ok = errs[0] > errs[1] && errs[1] > errs[2] && spreads[0] > spreads[1] && spreads[1] > spreads[2] &&
                  secs <= 300.0;
  return {ok, fmt("eps 0.4/0.2/0.1: error %.4f > %.4f > %.4f, spread %.4f > %.4f > %.4f, %.1f s (limit 300 s)", errs[0],
                  errs[1], errs[2], spreads[0], spreads[1], spreads[2], secs)};
}

Outcome c11() {
  const auto m = builtin_model("flat-interval");
  const auto prof = stationary(m, make_grid(m, 256, 0, Quadrature::GaussLegendre), "flat-interval GL n=256 (HJ)");
  const HamiltonianSolver solver(m, prof);
  const auto tab = table(solver, {Axis{-6.0, 6.0, 601}}, "flat-interval [-6, 6] x 601");
  if (!table_convex(tab)) return {false, "flat-interval table is not convex; the Hopf-Lax oracle does not apply"};
  std::vector<std::vector<double>> xs;
  for (int k = 0; k <= 2000; ++k) xs.push_back({-1.0 + 1e-3 * k});
  const auto rate = legendre_transform(tab, xs);
  auto phi0 = [](double x) { return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * x)); };
  std::vector<double> errs;
  for (std::size_t nx : {256u, 512u}) {
    const SpaceGrid space{nx, 1.0};
    const auto hj = solve_hj(sample_initial(bump(), space), tab, 0.5, space);
    const auto ref = hopf_lax_oracle(phi0, tab, rate, 0.5, space);
    double e = 0.0;
    for (std::size_t j = 0; j < nx; ++j) e = std::max(e, std::abs(hj.field.phi[j] - ref[j]));
    errs.push_back(e);
  }
  const double ratio = errs[0] / errs[1];
  return {errs[0] <= 5e-2 && ratio >= 1.4,
          fmt("convex table; L-inf vs Hopf-Lax at T=0.5: nx=256 %.3g (tol 5e-2), nx=512 %.3g, ratio %.2f (min 1.4)",
              errs[0], errs[1], ratio)};
}

Outcome c12() {
  const std::size_t saved = thread_count();
  set_thread_count(4);
  const auto t0 = std::chrono::steady_clock::now();
  const auto st = ensemble(builtin_model("flat-interval"), 200000, 200.0, {{0.5}}, 1);
  const double secs = seconds_since(t0);
  set_thread_count(saved);
  // the stated target; the closed form 0.5 / tanh(0.5) - 1 = 0.081977 is printed alongside
  const double target = 0.082323;
  const auto& c = st.cgf[0];
  const double tol = 3.0 * c.std_error + 0.02;
  return {std::abs(c.value - target) <= tol && secs <= 120.0,
          fmt("Lambda(0.5) = %.5f vs %.6f (closed form %.6f), |diff| = %.4f <= 3 SE + 0.02 = %.4f (SE %.4f), %.1f s "
              "on 4 threads (limit 120 s)",
              c.value, target, flat_closed_form(0.5), std::abs(c.value - target), tol, c.std_error, secs)};
}

Outcome c13() {
  const auto m = builtin_model("drift-interval");
  const auto prof = stationary(m, make_grid(m, 1024), "drift-interval n=1024 (gradient)");
  const HamiltonianSolver solver(m, prof);
  const auto tab = table(solver, {Axis{-1e-3, 1e-3, 3}}, "drift-interval [-1e-3, 1e-3] x 3");
  const double grad = (tab.H[2] - tab.H[0]) / 2e-3;
  const auto st = ensemble(m, 100000, 100.0, {}, 1);
  const double diff = std::abs(st.mean_velocity[0] - grad);
  return {diff <= 3.0 * st.mean_velocity_se[0],
          fmt("mean X_t/t = %.6f, central-difference H'(0) = %.6f, |diff| = %.3g <= 3 SE = %.3g", st.mean_velocity[0],
              grad, diff, 3.0 * st.mean_velocity_se[0])};
}

Outcome c14() {
  using namespace expr;
  int failures = 0;
  auto expect = [&](const std::string& src, double want) {
    if (eval(parse(src), {}) != want) ++failures;
  };
  struct Op {
    std::string text;
    int prec;
    bool right;
    double (*apply)(double, double);
  };
  const std::vector<Op> ops{{"+", 1, false, [](double a, double b) { return a + b; }},
                            {"-", 1, false, [](double a, double b) { return a - b; }},
                            {"*", 2, false, [](double a, double b) { return a * b; }},
                            {"/", 2, false, [](double a, double b) { return a / b; }},
                            {"^", 4, true, [](double a, double b) { return std::pow(a, b); }}};
  for (const auto& o1 : ops)
    for (const auto& o2 : ops) {
      const bool right = o2.prec > o1.prec || (o1.prec == o2.prec && o1.right);
      expect("2" + o1.text + "3" + o2.text + "2", right ? o1.apply(2, o2.apply(3, 2)) : o2.apply(o1.apply(2, 3), 2));
    }
  for (const auto& o : ops) {
    expect("-3" + o.text + "2", o.text == "^" ? -9.0 : o.apply(-3, 2));
    expect("3" + o.text + "-2", o.apply(3, -2));
  }
  expect("2+3*4", 14);
  expect("-2^2", -4);
  expect("2^3^2", 512);
  expect("(2+3)*4", 20);
  const int suite_failures = failures;

  testing::RandomExprGen gen(14);
  int round_trip_failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const Expr e(gen.tree(6));
    if (!structurally_equal(e, parse(to_string(e)))) ++round_trip_failures;
  }
  return {suite_failures == 0 && round_trip_failures == 0,
          fmt("precedence/associativity suite: %d failures; print-parse round trip on 10000 random trees: %d failures",
              suite_failures, round_trip_failures)};
}

}  // namespace

int main(int argc, char** argv) {
  // 6, 7 and 8 audit what the other criteria produced, so they run last.
  const std::vector<std::pair<int, std::function<Outcome()>>> order{
      {1, c1},   {2, c2},   {3, c3},   {4, c4},   {5, c5},   {9, c9},  {10, c10},
      {11, c11}, {12, c12}, {13, c13}, {14, c14}, {6, c6},   {7, c7},  {8, c8}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  std::map<int, Outcome> results;
  for (const auto& [id, fn] : order) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      results[id] = fn();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("exception: ") + e.what()};
    }
    std::fprintf(stderr, "[criterion %d done in %.1f s]\n", id, seconds_since(t0));
  }
  int failed = 0;
  for (const auto& [id, r] : results) {
    std::printf("criterion %2d: %s  %s\n", id, r.pass ? "PASS" : "FAIL", r.detail.c_str());
    failed += !r.pass;
  }
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
