#include "kld/pdmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kld/parallel.hpp"

namespace kld {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinAcceptance = 1e-3;

double exponential1(std::mt19937_64& rng) { return -std::log1p(-uniform01(rng)); }

Vec3 add_scaled(const Vec3& x, double s, const Vec3& y) { return {x[0] + s * y[0], x[1] + s * y[1], x[2] + s * y[2]}; }

}  // namespace

VelocitySampler::VelocitySampler(const VelocityModel& model) : model_(&model) {
  if (model.kind() == ManifoldKind::Sphere) {
    // grid maximum with a margin stands in for sup M
    double peak = 0.0;
    const std::size_t nt = 256, np = 129;
    for (std::size_t j = 0; j < np; ++j)
      for (std::size_t i = 0; i < nt; ++i)
        peak = std::max(peak, model.density({kTwoPi * static_cast<double>(i) / nt,
                                             std::numbers::pi * static_cast<double>(j) / (np - 1)}));
    envelope_ = 1.05 * peak;
    // nu is normalised, so the mean of M is one and the acceptance is 1 / envelope
    acceptance_ = envelope_ > 0.0 ? 1.0 / envelope_ : 0.0;
    if (acceptance_ < kMinAcceptance)
      throw PdmpError("rejection acceptance ratio " + std::to_string(acceptance_) + " below 1e-3: M is too peaked");
    return;
  }
  const double lo = model.kind() == ManifoldKind::Interval ? -1.0 : 0.0;
  const double hi = model.kind() == ManifoldKind::Interval ? 1.0 : kTwoPi;
  coord_.resize(kTableNodes);
  cum_.assign(kTableNodes, 0.0);
  const double h = (hi - lo) / static_cast<double>(kTableNodes - 1);
  double prev = 0.0;
  for (std::size_t k = 0; k < kTableNodes; ++k) {
    coord_[k] = k + 1 == kTableNodes ? hi : lo + h * static_cast<double>(k);
    const double m = model.density({coord_[k], 0.0});
    if (!(m >= 0.0)) throw PdmpError("density is negative at " + std::to_string(coord_[k]));
    if (k > 0) cum_[k] = cum_[k - 1] + 0.5 * h * (prev + m);
    prev = m;
  }
  const double total = cum_.back();
  if (!(total > 0.0)) throw PdmpError("density has zero mass");
  for (double& c : cum_) c /= total;
  cum_.back() = 1.0;
}

double VelocitySampler::cdf(double a) const {
  if (coord_.empty()) throw PdmpError("no cumulative table for sphere velocities");
  if (a <= coord_.front()) return 0.0;
  if (a >= coord_.back()) return 1.0;
  const auto k = static_cast<std::size_t>(std::upper_bound(coord_.begin(), coord_.end(), a) - coord_.begin()) - 1;
  const double s = (a - coord_[k]) / (coord_[k + 1] - coord_[k]);
  return cum_[k] + s * (cum_[k + 1] - cum_[k]);
}

ChartPoint VelocitySampler::operator()(std::mt19937_64& rng) const {
  if (model_->kind() == ManifoldKind::Sphere) {
    for (;;) {
      const double z = 2.0 * uniform01(rng) - 1.0;
      const ChartPoint c{kTwoPi * uniform01(rng), std::acos(z)};
      if (uniform01(rng) * envelope_ < model_->density(c)) return c;
    }
  }
  const double u = uniform01(rng);
  const auto k = std::min<std::size_t>(
      static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin()), kTableNodes - 1);
  const double c0 = cum_[k - 1], c1 = cum_[k];
  const double s = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
  return model_->wrap({coord_[k - 1] + s * (coord_[k] - coord_[k - 1]), 0.0});
}

Trajectory simulate_one(const VelocityModel& model, const VelocitySampler& sampler, double t_final,
                        std::uint64_t seed) {
  if (!(t_final > 0.0)) throw PdmpError("t_final must be positive");
  const FlowField field(model, 1.0);
  std::mt19937_64 rng(seed);
  Trajectory tr;
  tr.seed = seed;
  Vec3 s = field.to_state(sampler(rng));
  Vec3 x{0.0, 0.0, 0.0};
  // The stationary velocity law is M pushed forward by the flow of Gamma for
  // an exponential(1) age, so this start makes V stationary from t = 0.
  if (!model.force_vanishes()) {
    const double age = exponential1(rng);
    const auto steps = static_cast<std::size_t>(std::ceil(age / std::min(1e-2, age / 10.0)));
    for (std::size_t k = 0; k < steps; ++k) s = field.step(s, age / static_cast<double>(steps));
  }
  tr.velocities.push_back(field.velocity(s));

  auto run = [&](double duration, double gap) {
    if (model.force_vanishes()) {
      x = add_scaled(x, duration, field.velocity(s));
      return;
    }
    const double h_max = std::min(1e-2, gap / 10.0);
    const auto steps = static_cast<std::size_t>(std::ceil(duration / h_max));
    if (steps == 0) return;
    const double h = duration / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      const Vec3 a1 = field.rate(s), b1 = field.velocity(s);
      const Vec3 s2 = add_scaled(s, 0.5 * h, a1);
      const Vec3 a2 = field.rate(s2), b2 = field.velocity(s2);
      const Vec3 s3 = add_scaled(s, 0.5 * h, a2);
      const Vec3 a3 = field.rate(s3), b3 = field.velocity(s3);
      const Vec3 s4 = add_scaled(s, h, a3);
      const Vec3 a4 = field.rate(s4), b4 = field.velocity(s4);
      for (int i = 0; i < 3; ++i) {
        s[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        x[i] += h / 6.0 * (b1[i] + 2.0 * b2[i] + 2.0 * b3[i] + b4[i]);
      }
      s = field.project(s);
    }
  };

  double t = 0.0;
  for (;;) {
    const double gap = exponential1(rng);
    const double end = std::min(t + gap, t_final);
    run(end - t, gap);
    t = end;
    if (t >= t_final) break;
    tr.jump_times.push_back(t);
    tr.positions.push_back(x);
    s = field.to_state(sampler(rng));
    tr.velocities.push_back(field.velocity(s));
  }
  tr.positions.push_back(x);
  tr.final_x = x;
  tr.final_v = field.velocity(s);
  return tr;
}

Trajectory simulate_one(const VelocityModel& model, double t_final, std::uint64_t seed) {
  return simulate_one(model, VelocitySampler(model), t_final, seed);
}

CgfEstimate cgf_estimate(const std::vector<double>& a, double t_final) {
  const std::size_t n = a.size();
  if (n < 2) throw PdmpError("need at least two samples");
  const double m = *std::max_element(a.begin(), a.end());
  std::vector<double> e(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    e[k] = std::exp(a[k] - m);
    total += e[k];
  }
  CgfEstimate out;
  out.value = (m + std::log(total / static_cast<double>(n))) / t_final;

  std::vector<double> loo(n);
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double rest = total - e[k];
    double log_rest = m + std::log(rest);
    if (rest < 1e-8 * total) {
      // sample k dominates: redo the others with their own shift
      double m2 = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i)
        if (i != k) m2 = std::max(m2, a[i]);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (i != k) s += std::exp(a[i] - m2);
      log_rest = m2 + std::log(s);
    }
    loo[k] = (log_rest - std::log(static_cast<double>(n - 1))) / t_final;
    mean += loo[k];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  out.std_error = std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

EnsembleStats ensemble(const VelocityModel& model, std::size_t n, double t_final,
                       const std::vector<std::vector<double>>& p_list, std::uint64_t base_seed) {
  if (n < 1000) throw PdmpError("ensemble size " + std::to_string(n) + " below minimum 1000");
  if (!(t_final > 0.0)) throw PdmpError("t_final must be positive");
  const int d = model.dim();
  for (const auto& p : p_list)
    if (static_cast<int>(p.size()) != d)
      throw PdmpError("p has " + std::to_string(p.size()) + " components, expected " + std::to_string(d));

  const VelocitySampler sampler(model);
  EnsembleStats st;
  st.n = n;
  st.t_final = t_final;
  st.dim = d;
  st.endpoints.resize(n);
  std::vector<std::size_t> jumps(n);
  parallel_for(n, [&](std::size_t k) {
    const Trajectory tr = simulate_one(model, sampler, t_final, base_seed + k);
    st.endpoints[k] = tr.final_x;
    jumps[k] = tr.jump_times.size();
  });

  const double nn = static_cast<double>(n);
  double jump_total = 0.0;
  for (std::size_t j : jumps) jump_total += static_cast<double>(j);
  st.jumps_per_time = jump_total / nn / t_final;

  st.mean_velocity.assign(d, 0.0);
  for (const auto& x : st.endpoints)
    for (int i = 0; i < d; ++i) st.mean_velocity[i] += x[i] / t_final;
  for (double& m : st.mean_velocity) m /= nn;
  st.covariance.assign(static_cast<std::size_t>(d * d), 0.0);
  const double rt = std::sqrt(t_final);
  for (const auto& x : st.endpoints)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        st.covariance[i * d + j] +=
            (x[i] / rt - st.mean_velocity[i] * rt) * (x[j] / rt - st.mean_velocity[j] * rt);
  for (double& c : st.covariance) c /= nn - 1.0;
  st.mean_velocity_se.resize(d);
  for (int i = 0; i < d; ++i) st.mean_velocity_se[i] = std::sqrt(st.covariance[i * d + i] / t_final / nn);

  std::vector<double> a(n);
  for (const auto& p : p_list) {
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += p[i] * st.endpoints[k][i];
      a[k] = s;
    }
    CgfEstimate c = cgf_estimate(a, t_final);
    c.p = p;
    st.cgf.push_back(std::move(c));
  }
  return st;
}

}  // namespace kld
