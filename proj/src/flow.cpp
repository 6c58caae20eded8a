#include "kld/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "kld/parallel.hpp"

namespace kld {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec3 axpy(const Vec3& x, double a, const Vec3& y) { return {x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2]}; }
Vec3 sub(const Vec3& x, const Vec3& y) { return {x[0] - y[0], x[1] - y[1], x[2] - y[2]}; }
double norm(const Vec3& x) { return std::sqrt(dot(x, x)); }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& x) {
  const double n = norm(x);
  return {x[0] / n, x[1] / n, x[2] / n};
}

// Newton refinement of a zero of the field near x.
Vec3 refine_zero(const FlowField& field, Vec3 x) {
  const auto kind = field.model().kind();
  if (kind != ManifoldKind::Sphere) {
    const double h = 1e-7;
    for (int it = 0; it < 30; ++it) {
      const double g = field.rate(x)[0];
      if (std::abs(g) < 1e-15) break;
      const double dg = (field.rate({x[0] + h, 0, 0})[0] - field.rate({x[0] - h, 0, 0})[0]) / (2.0 * h);
      if (dg == 0.0) break;
      const double dx = g / dg;
      if (std::abs(dx) > 1e-3) break;
      x = field.project({x[0] - dx, 0.0, 0.0});
      if (std::abs(dx) < 1e-16) break;
    }
    return x;
  }
  const double h = 1e-7;
  for (int it = 0; it < 30; ++it) {
    Vec3 helper = std::abs(x[2]) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    const Vec3 t1 = normalized(cross(x, helper));
    const Vec3 t2 = cross(x, t1);
    auto tangential = [&](double u1, double u2) {
      const Vec3 y = field.project(axpy(axpy(x, u1, t1), u2, t2));
      const Vec3 f = field.rate(y);
      return std::array<double, 2>{dot(t1, f), dot(t2, f)};
    };
    const auto g = tangential(0.0, 0.0);
    if (std::hypot(g[0], g[1]) < 1e-15) break;
    const auto gx1 = tangential(h, 0.0), gx0 = tangential(-h, 0.0);
    const auto gy1 = tangential(0.0, h), gy0 = tangential(0.0, -h);
    const double j11 = (gx1[0] - gx0[0]) / (2 * h), j21 = (gx1[1] - gx0[1]) / (2 * h);
    const double j12 = (gy1[0] - gy0[0]) / (2 * h), j22 = (gy1[1] - gy0[1]) / (2 * h);
    const double det = j11 * j22 - j12 * j21;
    if (std::abs(det) < 1e-14) break;
    const double u1 = -(j22 * g[0] - j12 * g[1]) / det;
    const double u2 = -(-j21 * g[0] + j11 * g[1]) / det;
    if (std::hypot(u1, u2) > 1e-3) break;
    x = field.project(axpy(axpy(x, u1, t1), u2, t2));
    if (std::hypot(u1, u2) < 1e-16) break;
  }
  return x;
}

// Poincare section s(x) = grad . (x - anchor) with a constant gradient.
struct Section {
  Vec3 grad{};
  Vec3 anchor{};
  double value(const Vec3& x) const { return dot(grad, sub(x, anchor)); }
};

// One RK4 step with the section coordinate as the independent variable,
// landing on s = 0 from a state with value s0 < 0. Returns the state and
// the elapsed time.
std::pair<Vec3, double> henon_step(const FlowField& field, const Section& sec, const Vec3& x, double ds) {
  auto g = [&](const Vec3& y, Vec3& dy, double& dt) {
    const Vec3 f = field.rate(y);
    const double rate = dot(sec.grad, f);
    dy = {f[0] / rate, f[1] / rate, f[2] / rate};
    dt = 1.0 / rate;
  };
  Vec3 k1, k2, k3, k4;
  double t1, t2, t3, t4;
  g(x, k1, t1);
  g(axpy(x, 0.5 * ds, k1), k2, t2);
  g(axpy(x, 0.5 * ds, k2), k3, t3);
  g(axpy(x, ds, k3), k4, t4);
  Vec3 y = x;
  for (int i = 0; i < 3; ++i) y[i] += ds / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return {field.project(y), ds / 6.0 * (t1 + 2 * t2 + 2 * t3 + t4)};
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = sub(b, a);
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(sub(p, a), ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(sub(p, axpy(a, t, ab)));
}

double directed_hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  constexpr std::size_t kSamples = 128;
  const std::size_t stride = std::max<std::size_t>(1, a.size() / kSamples);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); i += stride) {
    double best = std::numeric_limits<double>::infinity();
    if (b.size() == 1) best = norm(sub(a[i], b[0]));
    for (std::size_t j = 0; j + 1 < b.size(); ++j) best = std::min(best, point_segment_distance(a[i], b[j], b[j + 1]));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

FlowField::FlowField(const VelocityModel& model, double sign) : model_(&model), sign_(sign) {}

Vec3 FlowField::to_state(const ChartPoint& c) const {
  switch (model_->kind()) {
    case ManifoldKind::Interval: return {c.a, 0.0, 0.0};
    case ManifoldKind::Ring: return {c.a, 0.0, 0.0};
    case ManifoldKind::Sphere: return model_->embed(c);
  }
  return {};
}

ChartPoint FlowField::to_chart(const Vec3& x) const {
  switch (model_->kind()) {
    case ManifoldKind::Interval: return {std::clamp(x[0], -1.0, 1.0), 0.0};
    case ManifoldKind::Ring: return model_->wrap({x[0], 0.0});
    case ManifoldKind::Sphere: return model_->chart_of(x);
  }
  return {};
}

Vec3 FlowField::velocity(const Vec3& x) const {
  switch (model_->kind()) {
    case ManifoldKind::Interval: return {x[0], 0.0, 0.0};
    case ManifoldKind::Ring: return {std::cos(x[0]), std::sin(x[0]), 0.0};
    case ManifoldKind::Sphere: return normalized(x);
  }
  return {};
}

Vec3 FlowField::rate(const Vec3& x) const {
  if (model_->force_vanishes()) return {0.0, 0.0, 0.0};
  switch (model_->kind()) {
    case ManifoldKind::Interval: return {sign_ * model_->force({std::clamp(x[0], -1.0, 1.0), 0.0})[0], 0.0, 0.0};
    case ManifoldKind::Ring: return {sign_ * model_->force(model_->wrap({x[0], 0.0}))[0], 0.0, 0.0};
    case ManifoldKind::Sphere: {
      const ChartPoint c = model_->chart_of(x);
      const auto f = model_->force(c);
      const double ct = std::cos(c.a), st = std::sin(c.a);
      const double cp = std::cos(c.b), sp = std::sin(c.b);
      const Vec3 e_theta{-st, ct, 0.0};
      const Vec3 e_phi{cp * ct, cp * st, -sp};
      return {sign_ * (f[0] * e_theta[0] + f[1] * e_phi[0]), sign_ * (f[0] * e_theta[1] + f[1] * e_phi[1]),
              sign_ * (f[0] * e_theta[2] + f[1] * e_phi[2])};
    }
  }
  return {};
}

Vec3 FlowField::project(const Vec3& x) const {
  switch (model_->kind()) {
    case ManifoldKind::Interval: return {std::clamp(x[0], -1.0, 1.0), 0.0, 0.0};
    case ManifoldKind::Ring: return {x[0], 0.0, 0.0};
    case ManifoldKind::Sphere: return normalized(x);
  }
  return x;
}

Vec3 FlowField::step(const Vec3& x, double dt) const {
  const Vec3 k1 = rate(x);
  const Vec3 k2 = rate(axpy(x, 0.5 * dt, k1));
  const Vec3 k3 = rate(axpy(x, 0.5 * dt, k2));
  const Vec3 k4 = rate(axpy(x, dt, k3));
  Vec3 y = x;
  for (int i = 0; i < 3; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return project(y);
}

FlowTrace integrate_flow(const VelocityModel& model, const ChartPoint& v0, double duration, double dt,
                         double sign) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(duration >= 0.0)) throw std::invalid_argument("duration must be non-negative");
  model.check_chart(v0);
  const FlowField field(model, sign);
  FlowTrace trace;
  trace.start = v0;
  trace.dt = dt;
  trace.duration = duration;
  Vec3 x = field.project(field.to_state(v0));
  trace.points.push_back(field.to_chart(x));
  const auto full = static_cast<std::size_t>(std::floor(duration / dt + 1e-9));
  for (std::size_t k = 0; k < full; ++k) {
    x = field.step(x, dt);
    trace.points.push_back(field.to_chart(x));
  }
  const double rest = duration - static_cast<double>(full) * dt;
  if (rest > 1e-12 * dt) {
    x = field.step(x, rest);
    trace.points.push_back(field.to_chart(x));
  }
  return trace;
}

WalkOutcome follow_to_omega_limit(const FlowField& field, const ChartPoint& v0, const FlowControls& ctl,
                                  const StepObserver& observer) {
  const auto kind = field.model().kind();
  Vec3 x = field.project(field.to_state(v0));
  Vec3 f = field.rate(x);
  WalkOutcome out;
  if (norm(f) == 0.0) {
    out.omega.set = FixedPoint{field.to_chart(x)};
    return out;
  }

  std::optional<Section> section;
  double ring_dir = 0.0;
  if (kind == ManifoldKind::Ring) {
    ring_dir = f[0] > 0.0 ? 1.0 : -1.0;
    section = Section{{ring_dir, 0.0, 0.0}, {x[0] + ring_dir * kTwoPi, 0.0, 0.0}};
  } else if (kind == ManifoldKind::Sphere) {
    section = Section{normalized(f), x};
  }

  Vec3 last_return = x;
  double last_return_time = 0.0;
  std::size_t last_return_step = 0;
  std::vector<Vec3> polyline{x};
  std::vector<double> polytimes{0.0};

  double t = 0.0;
  int small = 0;
  while (t < ctl.t_max) {
    Vec3 x1 = field.step(x, ctl.dt);
    double dt = ctl.dt;
    bool crossed = false;
    if (section) {
      const double s0 = section->value(x);
      const double s1 = section->value(x1);
      if (s0 < 0.0 && s1 >= 0.0) {
        auto [y, dty] = henon_step(field, *section, x, -s0);
        x1 = y;
        dt = dty;
        crossed = true;
      }
    }
    const Vec3 f1 = field.rate(x1);
    if (observer) observer(FlowStep{x, x1, f, f1, t, dt});
    t += dt;
    ++out.steps;
    x = x1;
    f = f1;
    if (section) {
      polyline.push_back(x);
      polytimes.push_back(t - last_return_time);
    }

    if (crossed) {
      const double gap = kind == ManifoldKind::Ring ? std::abs(x[0] - (last_return[0] + ring_dir * kTwoPi))
                                                    : norm(sub(x, last_return));
      if (gap < ctl.return_tol) {
        PeriodicOrbit orbit;
        orbit.period = t - last_return_time;
        for (const auto& p : polyline) orbit.points.push_back(field.to_chart(p));
        orbit.times = polytimes;
        out.omega.set = std::move(orbit);
        out.period_first_step = last_return_step;
        return out;
      }
      last_return = x;
      last_return_time = t;
      last_return_step = out.steps;
      polyline.assign(1, x);
      polytimes.assign(1, 0.0);
      if (kind == ManifoldKind::Ring) section->anchor[0] = x[0] + ring_dir * kTwoPi;
      else section->anchor = x;
    }

    if (norm(f) <= ctl.fixed_tol) {
      if (++small >= ctl.fixed_steps) {
        out.omega.set = FixedPoint{field.to_chart(refine_zero(field, x))};
        return out;
      }
    } else {
      small = 0;
    }
  }
  throw Unclassified("no fixed point or periodic return found before t_max = " + std::to_string(ctl.t_max));
}

OmegaLimit classify_omega_limit(const VelocityModel& model, const ChartPoint& v0, const FlowControls& controls) {
  model.check_chart(v0);
  const FlowField field(model, -1.0);
  return follow_to_omega_limit(field, v0, controls).omega;
}

double orbit_average(const VelocityModel& model, const OmegaLimit& omega,
                     const std::function<double(const ChartPoint&)>& f) {
  (void)model;
  if (omega.is_fixed_point()) return f(omega.fixed_point().w);
  const auto& orbit = omega.orbit();
  if (orbit.points.size() < 2 || orbit.period <= 0.0) return f(orbit.points.front());
  double acc = 0.0;
  double prev = f(orbit.points[0]);
  for (std::size_t k = 1; k < orbit.points.size(); ++k) {
    const double cur = f(orbit.points[k]);
    acc += 0.5 * (prev + cur) * (orbit.times[k] - orbit.times[k - 1]);
    prev = cur;
  }
  return acc / orbit.period;
}

bool same_limit_set(const VelocityModel& model, const OmegaLimit& a, const OmegaLimit& b) {
  if (a.is_fixed_point() != b.is_fixed_point()) return false;
  if (a.is_fixed_point()) return model.distance(a.fixed_point().w, b.fixed_point().w) < 1e-6;
  std::vector<Vec3> pa, pb;
  for (const auto& c : a.orbit().points) pa.push_back(model.embed(c));
  for (const auto& c : b.orbit().points) pb.push_back(model.embed(c));
  constexpr double kTol = 1e-5;
  // cheap rejection before the sampled Hausdorff distance
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& q : pb) nearest = std::min(nearest, norm(sub(pa.front(), q)));
  if (nearest > 0.1) return false;
  return directed_hausdorff(pa, pb) < kTol && directed_hausdorff(pb, pa) < kTol;
}

std::vector<OmegaLimit> find_all_omega_limits(const VelocityModel& model, std::span<const ChartPoint> seeds,
                                              const FlowControls& controls) {
  std::vector<OmegaLimit> found(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) { found[i] = classify_omega_limit(model, seeds[i], controls); });
  std::vector<OmegaLimit> distinct;
  for (auto& omega : found) {
    bool seen = false;
    for (const auto& d : distinct) {
      if (same_limit_set(model, omega, d)) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      omega.basin = static_cast<int>(distinct.size());
      distinct.push_back(std::move(omega));
    }
  }
  return distinct;
}

std::vector<ChartPoint> omega_seed_points(const VelocityModel& model, const VelocityGrid& grid) {
  std::vector<ChartPoint> seeds = grid.nodes;
  auto add_missing = [&](const ChartPoint& c) {
    for (const auto& s : seeds)
      if (model.distance(s, c) < 1e-14) return;
    seeds.push_back(c);
  };
  if (model.kind() == ManifoldKind::Interval) {
    add_missing({-1.0, 0.0});
    add_missing({1.0, 0.0});
  } else if (model.kind() == ManifoldKind::Sphere) {
    add_missing({0.0, 0.0});
    add_missing({0.0, std::numbers::pi});
  }
  return seeds;
}

}  // namespace kld
