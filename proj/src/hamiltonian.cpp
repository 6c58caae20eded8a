#include "kld/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iostream>

#include "kld/parallel.hpp"

namespace kld {

namespace {

void check_dim(std::span<const double> p, std::size_t dim) {
  if (p.size() != dim)
    throw HamiltonianError("p has " + std::to_string(p.size()) + " components, expected " + std::to_string(dim));
}

// Three-point derivative on a non-uniform stencil x0 < x1 < x2, at x1.
double d3(double x0, double x1, double x2, double f0, double f1, double f2) {
  const double h1 = x1 - x0, h2 = x2 - x1;
  return (-h2 / (h1 * (h1 + h2))) * f0 + ((h2 - h1) / (h1 * h2)) * f1 + (h1 / (h2 * (h1 + h2))) * f2;
}

}  // namespace

HamiltonianSolver::HamiltonianSolver(const VelocityModel& model, const StationaryProfile& profile,
                                     HamiltonianControls controls)
    : model_(&model), profile_(&profile), controls_(controls), dim_(static_cast<std::size_t>(model.dim())) {
  const auto& grid = profile.grid;
  const std::size_t n = grid.size();
  density_ = profile.values;
  ratio_.resize(n);
  for (std::size_t i = 0; i < n; ++i) ratio_[i] = model.density(grid.nodes[i]) / density_[i];

  nodes_.resize(n);
  parallel_for(n, [&](std::size_t i) { nodes_[i] = characteristic(grid.nodes[i]); });

  // Seeds the grid may miss (interval endpoints, poles) only contribute
  // omega-limit sets.
  const auto seeds = omega_seed_points(model, grid);
  std::vector<OmegaLimit> extra(seeds.size() - n);
  const FlowField field(model, -1.0);
  parallel_for(extra.size(), [&](std::size_t k) {
    extra[k] = follow_to_omega_limit(field, seeds[n + k], controls_.flow).omega;
  });

  // Limit sets are told apart by their time averages of r and v. Only these
  // enter H_crit, so sets sharing them are interchangeable.
  auto r_at = [&](const ChartPoint& c) { return model.density(c) / profile.value_at(c); };
  auto add = [&](const OmegaLimit& omega) -> std::size_t {
    std::vector<double> mv(dim_);
    for (std::size_t d = 0; d < dim_; ++d)
      mv[d] = orbit_average(model, omega, [&](const ChartPoint& c) { return model.embed(c)[d]; });
    const double mr = orbit_average(model, omega, r_at);
    for (std::size_t k = 0; k < omegas_.size(); ++k) {
      double gap = std::abs(mr - omega_mean_r_[k]);
      for (std::size_t d = 0; d < dim_; ++d) gap = std::max(gap, std::abs(mv[d] - omega_mean_v_[k][d]));
      if (gap <= 1e-9) return k;
    }
    omegas_.push_back(omega);
    omegas_.back().basin = static_cast<int>(omegas_.size() - 1);
    omega_mean_v_.push_back(std::move(mv));
    omega_mean_r_.push_back(mr);
    return omegas_.size() - 1;
  };
  for (auto& ch : nodes_) {
    ch.omega = add(ch.limit);
    ch.limit = OmegaLimit{};
  }
  for (const auto& omega : extra) add(omega);
}

Characteristic HamiltonianSolver::characteristic(const ChartPoint& v) const {
  model_->check_chart(v);
  const FlowField field(*model_, -1.0);
  Characteristic ch;
  ch.dim = dim_;
  auto r_at = [&](const ChartPoint& c) { return model_->density(c) / profile_->value_at(c); };
  auto push = [&](const Vec3& x) {
    ch.samples.push_back(r_at(field.to_chart(x)));
    const Vec3 vel = field.velocity(x);
    for (std::size_t d = 0; d < dim_; ++d) ch.samples.push_back(vel[d]);
  };
  push(field.project(field.to_state(v)));
  auto observer = [&](const FlowStep& s) {
    // cubic Hermite midpoint, fourth-order like the RK4 step itself
    Vec3 mid;
    for (int d = 0; d < 3; ++d) mid[d] = 0.5 * (s.x0[d] + s.x1[d]) + s.dt / 8.0 * (s.f0[d] - s.f1[d]);
    push(field.project(mid));
    push(s.x1);
    ch.dt.push_back(s.dt);
  };
  auto outcome = follow_to_omega_limit(field, v, controls_.flow, observer);
  if (outcome.omega.is_fixed_point()) {
    ch.tail = Characteristic::Tail::Fixed;
    const ChartPoint w = outcome.omega.fixed_point().w;
    ch.tail_r = r_at(w);
    const Vec3 x = model_->embed(w);
    ch.tail_v.assign(x.begin(), x.begin() + static_cast<long>(dim_));
  } else {
    ch.tail = Characteristic::Tail::Periodic;
    ch.period_first_step = outcome.period_first_step;
  }
  ch.limit = std::move(outcome.omega);
  return ch;
}

double HamiltonianSolver::omega_rate(std::size_t k, std::span<const double> p, double H) const {
  double vp = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) vp += omega_mean_v_[k][d] * p[d];
  return omega_mean_r_[k] + H - vp;
}

double HamiltonianSolver::evaluate(const Characteristic& ch, std::span<const double> p, double H) const {
  check_dim(p, dim_);
  const std::size_t stride = dim_ + 1;
  double tail_rate = 0.0;
  if (ch.tail == Characteristic::Tail::Fixed) {
    tail_rate = ch.tail_r + H;
    for (std::size_t d = 0; d < dim_; ++d) tail_rate -= ch.tail_v[d] * p[d];
  } else {
    tail_rate = omega_rate(ch.omega, p, H);
  }
  if (!(tail_rate >= controls_.rate_eps)) return kDivergent;

  auto rate = [&](std::size_t s, double& g) {
    const double* q = &ch.samples[s * stride];
    g = q[0];
    double a = q[0] + H;
    for (std::size_t d = 0; d < dim_; ++d) a -= q[1 + d] * p[d];
    return a;
  };

  const bool periodic = ch.tail == Characteristic::Tail::Periodic;
  double A = 0.0, J = 0.0, A0 = 0.0, J0 = 0.0;
  double g0 = 0.0;
  double a0 = rate(0, g0);
  double e0 = 1.0;  // exp(-A)
  const std::size_t steps = ch.dt.size();
  for (std::size_t k = 0; k < steps; ++k) {
    if (periodic && k == ch.period_first_step) {
      A0 = A;
      J0 = J;
    }
    double gm = 0.0, g1 = 0.0;
    const double am = rate(2 * k + 1, gm);
    const double a1 = rate(2 * k + 2, g1);
    const double h = ch.dt[k];
    // Simpson for the exponent, and the quadratic through (a0, am, a1) for
    // its value at the midpoint
    const double Am = A + h / 24.0 * (5.0 * a0 + 8.0 * am - a1);
    const double A1 = A + h / 6.0 * (a0 + 4.0 * am + a1);
    const double e1 = std::exp(-A1);
    J += h / 6.0 * (g0 * e0 + 4.0 * gm * std::exp(-Am) + g1 * e1);
    A = A1;
    e0 = e1;
    a0 = a1;
    g0 = g1;
    if (A > controls_.exponent_cap) return J + g0 * e0 / tail_rate;
  }
  if (!periodic) return J + ch.tail_r * e0 / tail_rate;
  const double dA = A - A0;
  if (!(dA > 0.0)) return kDivergent;
  return J0 + (J - J0) / -std::expm1(-dA);
}

double HamiltonianSolver::eval_Q(std::size_t node, std::span<const double> p, double H) const {
  return evaluate(nodes_.at(node), p, H);
}

double HamiltonianSolver::normalization_integral(std::span<const double> p, double H) const {
  check_dim(p, dim_);
  const auto& w = profile_->grid.weights;
  double s = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double q = evaluate(nodes_[i], p, H);
    if (std::isinf(q)) return kDivergent;
    s += w[i] * density_[i] * q;
  }
  return s;
}

std::size_t HamiltonianSolver::critical_omega(std::span<const double> p) const {
  check_dim(p, dim_);
  std::size_t best = 0;
  double value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < omegas_.size(); ++k) {
    const double c = -omega_rate(k, p, 0.0);
    if (c > value) {
      value = c;
      best = k;
    }
  }
  return best;
}

double HamiltonianSolver::critical_H(std::span<const double> p) const {
  return -omega_rate(critical_omega(p), p, 0.0);
}

struct HamiltonianSolver::Tilted {
  std::vector<double> c;    // quadrature weight * r * exp(-A(h0)) per sample
  std::vector<double> gap;  // time since the previous sample
  std::size_t split = 0;    // samples before the last period (periodic tails)
  bool periodic = false;
  bool truncated = false;   // stopped at the exponent cap
  double tail_rate0 = 0.0;  // decay rate of the tail at h0
  double tail_coef = 0.0;   // r * exp(-A(h0)) at the last sample
  double period_dA0 = 0.0;  // exponent gained over the last period at h0
  double period_time = 0.0;
  bool divergent = false;
};

std::vector<HamiltonianSolver::Tilted> HamiltonianSolver::tilt(std::span<const double> p, double h0) const {
  std::vector<Tilted> out(nodes_.size());
  const std::size_t stride = dim_ + 1;
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    const Characteristic& ch = nodes_[n];
    Tilted& tn = out[n];
    tn.periodic = ch.tail == Characteristic::Tail::Periodic;
    if (tn.periodic) {
      tn.tail_rate0 = omega_rate(ch.omega, p, h0);
    } else {
      tn.tail_rate0 = ch.tail_r + h0;
      for (std::size_t d = 0; d < dim_; ++d) tn.tail_rate0 -= ch.tail_v[d] * p[d];
    }
    auto rate = [&](std::size_t s, double& g) {
      const double* q = &ch.samples[s * stride];
      g = q[0];
      double a = q[0] + h0;
      for (std::size_t d = 0; d < dim_; ++d) a -= q[1 + d] * p[d];
      return a;
    };
    const std::size_t steps = ch.dt.size();
    tn.c.reserve(2 * steps + 2);
    tn.gap.reserve(2 * steps + 2);
    double g0 = 0.0;
    double a0 = rate(0, g0);
    double A = 0.0, e0 = 1.0, A_split = 0.0;
    tn.c.push_back(0.0);
    tn.gap.push_back(0.0);
    for (std::size_t k = 0; k < steps; ++k) {
      if (tn.periodic && k == ch.period_first_step) {
        // the boundary sample is shared by the prefix and the period
        tn.split = tn.c.size();
        tn.c.push_back(0.0);
        tn.gap.push_back(0.0);
        A_split = A;
      }
      double gm = 0.0, g1 = 0.0;
      const double am = rate(2 * k + 1, gm);
      const double a1 = rate(2 * k + 2, g1);
      const double h = ch.dt[k];
      const double Am = A + h / 24.0 * (5.0 * a0 + 8.0 * am - a1);
      const double A1 = A + h / 6.0 * (a0 + 4.0 * am + a1);
      const double e1 = std::exp(-A1);
      tn.c.back() += h / 6.0 * g0 * e0;
      tn.c.push_back(4.0 * h / 6.0 * gm * std::exp(-Am));
      tn.gap.push_back(0.5 * h);
      tn.c.push_back(h / 6.0 * g1 * e1);
      tn.gap.push_back(0.5 * h);
      if (tn.periodic && k >= ch.period_first_step) tn.period_time += h;
      A = A1;
      e0 = e1;
      a0 = a1;
      g0 = g1;
      if (A > controls_.exponent_cap) {
        tn.truncated = true;
        break;
      }
    }
    tn.tail_coef = (tn.truncated || tn.periodic ? g0 : ch.tail_r) * e0;
    if (tn.periodic && !tn.truncated) {
      tn.period_dA0 = A - A_split;
    }
  }
  return out;
}

double HamiltonianSolver::tilted_q(const Tilted& tn, double d) const {
  const double tail_rate = tn.tail_rate0 + d;
  if (!(tail_rate >= controls_.rate_eps)) return kDivergent;
  double J = 0.0, J_split = 0.0, f = 1.0, last_gap = -1.0, fac = 1.0;
  for (std::size_t e = 0; e < tn.c.size(); ++e) {
    const double g = tn.gap[e];
    if (g != 0.0) {
      if (g != last_gap) {
        fac = std::exp(-d * g);
        last_gap = g;
      }
      f *= fac;
    }
    if (e == tn.split && tn.periodic) J_split = J;
    J += tn.c[e] * f;
  }
  if (tn.truncated || !tn.periodic) return J + tn.tail_coef * f / tail_rate;
  const double dA = tn.period_dA0 + d * tn.period_time;
  if (!(dA > 0.0)) return kDivergent;
  return J_split + (J - J_split) / -std::expm1(-dA);
}

double HamiltonianSolver::tilted_integral(const std::vector<Tilted>& nodes, double d) const {
  const auto& w = profile_->grid.weights;
  double total = 0.0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const double q = tilted_q(nodes[n], d);
    if (std::isinf(q)) return kDivergent;
    total += w[n] * density_[n] * q;
  }
  return total;
}

SpectralSolution HamiltonianSolver::solve(std::span<const double> p) const {
  check_dim(p, dim_);
  SpectralSolution sol;
  sol.p.assign(p.begin(), p.end());
  sol.H_crit = critical_H(p);
  const double delta = controls_.probe_rel * (1.0 + std::abs(sol.H_crit));
  const double probe = sol.H_crit + delta;
  // every H examined below is at or above probe - delta / 2, where the
  // exponent is bounded below, so the tilted sums cannot overflow
  const auto tilted = tilt(p, probe);
  auto integral = [&](double h) { return tilted_integral(tilted, h - probe); };
  const double i_probe = integral(probe);

  double h_eval = 0.0;
  if (i_probe <= 1.0) {
    sol.singular = true;
    sol.H = sol.H_crit;
    sol.integral = i_probe;
    sol.atom = omegas_[critical_omega(p)];
    const double i_half = integral(sol.H_crit + 0.5 * delta);
    const double d1 = 1.0 - i_probe;
    const double d2 = std::isinf(i_half) ? d1 : 1.0 - i_half;
    sol.mass_deficit = std::clamp(2.0 * d2 - d1, 0.0, 1.0);
    h_eval = probe;
  } else {
    double lo = probe;
    double hi = std::max(1.0, sol.H_crit + 1.0);
    double i_hi = integral(hi);
    for (int k = 0; i_hi >= 1.0; ++k) {
      if (k > 200)
        throw HamiltonianError("no upper bracket for H: I(" + std::to_string(probe) + ") = " + std::to_string(i_probe) +
                               ", I(" + std::to_string(hi) + ") = " + std::to_string(i_hi));
      lo = hi;
      hi = 2.0 * hi;
      i_hi = integral(hi);
    }
    // Bracketed false position on log I with the Illinois weight halving:
    // the bracket [lo, hi] is kept throughout, as in bisection.
    double fl = std::log(i_probe), fh = std::log(i_hi);
    // the best iterate beats the bracket midpoint where I is steep near H_crit
    double best = std::abs(fl) < std::abs(fh) ? lo : hi;
    double best_f = std::min(std::abs(fl), std::abs(fh));
    int side = 0;
    for (int it = 0; it < 300 && (hi - lo > controls_.bisect_tol || best_f > 1e-12); ++it) {
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(hi))) break;
      double x = (lo * fh - hi * fl) / (fh - fl);
      if (it >= 100 || !(x > lo && x < hi)) x = 0.5 * (lo + hi);
      const double fx = std::log(integral(x));
      if (std::abs(fx) < best_f) {
        best = x;
        best_f = std::abs(fx);
      }
      if (std::abs(fx) <= 1e-15) break;
      if (fx > 0.0) {
        lo = x;
        fl = fx;
        if (side == 1) fh *= 0.5;
        side = 1;
      } else {
        hi = x;
        fh = fx;
        if (side == -1) fl *= 0.5;
        side = -1;
      }
    }
    sol.H = best;
    h_eval = sol.H;
  }
  sol.q.resize(nodes_.size());
  sol.eta.resize(nodes_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    sol.q[i] = tilted_q(tilted[i], h_eval - probe);
    sol.eta[i] = -std::log(sol.q[i]);
    total += profile_->grid.weights[i] * density_[i] * sol.q[i];
  }
  if (!sol.singular) sol.integral = total;
  return sol;
}

namespace {

// fourth-order central difference from the values at -2h, -h, +h, +2h
double periodic_d5(double m2, double m1, double p1, double p2, double h) {
  return (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
}

}  // namespace

double HamiltonianSolver::eigen_residual(const SpectralSolution& sol) const {
  if (sol.singular) throw HamiltonianError("eigen_residual needs a non-singular solution");
  const auto& grid = profile_->grid;
  const auto& q = sol.q;
  const std::size_t n = grid.size();
  double qmax = 0.0;
  for (double v : q) qmax = std::max(qmax, v);

  auto local = [&](std::size_t i, double transport) {
    const Vec3& v = grid.vectors[i];
    double vp = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) vp += v[d] * sol.p[d];
    return std::abs((ratio_[i] + sol.H - vp) * q[i] + transport - ratio_[i] * sol.integral);
  };

  double worst = 0.0;
  switch (grid.kind) {
    case ManifoldKind::Interval:
      for (std::size_t i = 1; i + 1 < n; ++i) {
        const auto& x = grid.nodes;
        const double dq = d3(x[i - 1].a, x[i].a, x[i + 1].a, q[i - 1], q[i], q[i + 1]);
        worst = std::max(worst, local(i, model_->force(x[i])[0] * dq));
      }
      break;
    case ManifoldKind::Ring: {
      const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double dq = periodic_d5(q[(i + n - 2) % n], q[(i + n - 1) % n], q[(i + 1) % n], q[(i + 2) % n], h);
        worst = std::max(worst, local(i, model_->force(grid.nodes[i])[0] * dq));
      }
      break;
    }
    case ManifoldKind::Sphere: {
      const std::size_t nt = grid.n_theta, nb = grid.n_band;
      const double h = 2.0 * std::numbers::pi / static_cast<double>(nt);
      auto at = [&](std::size_t i, std::size_t j) { return q[j * nt + i]; };
      for (std::size_t j = 1; j + 1 < nb; ++j) {
        for (std::size_t i = 0; i < nt; ++i) {
          const std::size_t k = j * nt + i;
          const ChartPoint c = grid.nodes[k];
          const double sp = std::sin(c.b);
          const auto f = model_->force(c);
          const double dtheta = periodic_d5(at((i + nt - 2) % nt, j), at((i + nt - 1) % nt, j), at((i + 1) % nt, j),
                                            at((i + 2) % nt, j), h);
          const double dmu = d3(grid.mu[j - 1], grid.mu[j], grid.mu[j + 1], at(i, j - 1), at(i, j), at(i, j + 1));
          worst = std::max(worst, local(k, f[0] / sp * dtheta - f[1] * sp * dmu));
        }
      }
      break;
    }
  }
  return worst / qmax;
}

double eval_Q(const HamiltonianSolver& solver, std::span<const double> p, double H, const ChartPoint& v) {
  return solver.evaluate(solver.characteristic(v), p, H);
}

double Axis::at(std::size_t k) const {
  if (steps <= 1) return min;
  return min + (max - min) * static_cast<double>(k) / static_cast<double>(steps - 1);
}

namespace {

std::vector<std::size_t> strides_of(const std::vector<Axis>& axes) {
  std::vector<std::size_t> s(axes.size(), 1);
  for (std::size_t a = axes.size(); a-- > 1;) s[a - 1] = s[a] * axes[a].steps;
  return s;
}

std::size_t node_count(const std::vector<Axis>& axes) {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.steps;
  return n;
}

}  // namespace

double HamiltonianTable::query(std::span<const double> q) const {
  if (q.size() != axes.size()) throw HamiltonianError("query point has the wrong dimension");
  const auto strides = strides_of(axes);
  std::vector<std::size_t> k0(axes.size());
  std::vector<double> s(axes.size());
  bool clamped = false;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const Axis& ax = axes[a];
    if (ax.steps <= 1) {
      k0[a] = 0;
      s[a] = 0.0;
      continue;
    }
    const double h = (ax.max - ax.min) / static_cast<double>(ax.steps - 1);
    double u = (q[a] - ax.min) / h;
    if (u < 0.0 || u > static_cast<double>(ax.steps - 1)) {
      clamped = true;
      u = std::clamp(u, 0.0, static_cast<double>(ax.steps - 1));
    }
    k0[a] = std::min(static_cast<std::size_t>(u), ax.steps - 2);
    s[a] = u - static_cast<double>(k0[a]);
  }
  if (clamped && !warned_) {
    warned_ = true;
    std::cerr << "warning: Hamiltonian queried outside its table; clamping to the boundary\n";
  }
  double out = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << axes.size()); ++corner) {
    double wgt = 1.0;
    std::size_t idx = 0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const bool up = (corner >> a) & 1u;
      if (up && axes[a].steps <= 1) {
        wgt = 0.0;
        break;
      }
      wgt *= up ? s[a] : 1.0 - s[a];
      idx += (k0[a] + (up ? 1 : 0)) * strides[a];
    }
    if (wgt != 0.0) out += wgt * H[idx];
  }
  return out;
}

HamiltonianTable build_table(const HamiltonianSolver& solver, const std::vector<Axis>& axes) {
  if (axes.size() != solver.dim())
    throw HamiltonianError("table needs " + std::to_string(solver.dim()) + " p axes, got " +
                           std::to_string(axes.size()));
  for (const auto& a : axes)
    if (a.steps == 0 || (a.steps > 1 && !(a.max > a.min))) throw HamiltonianError("invalid p axis");
  HamiltonianTable t;
  t.axes = axes;
  const std::size_t n = node_count(axes);
  const auto strides = strides_of(axes);
  t.p.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.p[i].resize(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) t.p[i][a] = axes[a].at((i / strides[a]) % axes[a].steps);
  }
  t.H.resize(n);
  t.H_crit.resize(n);
  t.residual.resize(n);
  t.singular.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const auto sol = solver.solve(t.p[i]);
    t.H[i] = sol.H;
    t.H_crit[i] = sol.H_crit;
    t.residual[i] = sol.singular ? 0.0 : sol.integral - 1.0;
    t.singular[i] = sol.singular ? 1 : 0;
  });
  t.lipschitz = table_lipschitz(t);
  return t;
}

namespace {

// Visits every (node, next node along axis a) pair.
template <class F>
void for_each_edge(const HamiltonianTable& t, F&& f) {
  const auto strides = strides_of(t.axes);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t a = 0; a < t.axes.size(); ++a)
      if ((i / strides[a]) % t.axes[a].steps + 1 < t.axes[a].steps) f(i, i + strides[a], a, strides[a]);
}

}  // namespace

double table_lipschitz(const HamiltonianTable& t) {
  double worst = 0.0;
  for_each_edge(t, [&](std::size_t i, std::size_t j, std::size_t a, std::size_t) {
    worst = std::max(worst, std::abs(t.H[j] - t.H[i]) / std::abs(t.p[j][a] - t.p[i][a]));
  });
  return worst;
}

bool table_convex(const HamiltonianTable& t, double tol) {
  const auto strides = strides_of(t.axes);
  bool ok = true;
  for_each_edge(t, [&](std::size_t i, std::size_t j, std::size_t a, std::size_t stride) {
    if ((j / strides[a]) % t.axes[a].steps + 1 >= t.axes[a].steps) return;
    const double second = t.H[i] - 2.0 * t.H[j] + t.H[j + stride];
    if (second < -tol) ok = false;
  });
  return ok;
}

RateTable legendre_transform(const HamiltonianTable& table) {
  const std::size_t d = table.dim();
  const std::size_t per = d == 1 ? 201 : 21;
  std::vector<std::vector<double>> xs;
  std::size_t total = 1;
  for (std::size_t a = 0; a < d; ++a) total *= per;
  for (std::size_t i = 0; i < total; ++i) {
    std::vector<double> x(d);
    std::size_t r = i;
    for (std::size_t a = d; a-- > 0;) {
      x[a] = -1.0 + 2.0 * static_cast<double>(r % per) / static_cast<double>(per - 1);
      r /= per;
    }
    xs.push_back(std::move(x));
  }
  return legendre_transform(table, xs);
}

RateTable legendre_transform(const HamiltonianTable& table, const std::vector<std::vector<double>>& xs) {
  const std::size_t d = table.dim();
  const auto strides = strides_of(table.axes);
  RateTable out;
  out.x = xs;
  out.L.resize(xs.size());
  out.argmax_p.resize(xs.size());
  out.boundary.resize(xs.size());
  parallel_for(xs.size(), [&](std::size_t m) {
    const auto& x = xs[m];
    if (x.size() != d) throw HamiltonianError("rate point has the wrong dimension");
    auto f = [&](std::size_t i) {
      double s = -table.H[i];
      for (std::size_t a = 0; a < d; ++a) s += table.p[i][a] * x[a];
      return s;
    };
    std::size_t best = 0;
    double value = f(0);
    for (std::size_t i = 1; i < table.size(); ++i) {
      const double v = f(i);
      if (v > value) {
        value = v;
        best = i;
      }
    }
    std::vector<double> arg = table.p[best];
    bool boundary = false;
    double gain = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t k = (best / strides[a]) % table.axes[a].steps;
      if (table.axes[a].steps < 3) continue;
      if (k == 0 || k + 1 == table.axes[a].steps) {
        boundary = true;
        continue;
      }
      const double fm = f(best - strides[a]), fp = f(best + strides[a]);
      const double denom = fm - 2.0 * value + fp;
      if (!(denom < 0.0)) continue;
      const double off = 0.5 * (fm - fp) / denom;
      gain += -0.25 * (fm - fp) * off;
      arg[a] += off * (table.axes[a].max - table.axes[a].min) / static_cast<double>(table.axes[a].steps - 1);
    }
    out.L[m] = value + gain;
    out.argmax_p[m] = std::move(arg);
    out.boundary[m] = boundary ? 1 : 0;
  });
  return out;
}

}  // namespace kld
