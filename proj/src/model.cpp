#include "kld/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace kld {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kChartSlack = 1e-12;
constexpr double kDiffStep = 1e-5;

std::vector<std::string> slots_for(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Interval: return {"v"};
    case ManifoldKind::Ring: return {"theta"};
    case ManifoldKind::Sphere: return {"theta", "phi"};
  }
  return {};
}

std::size_t force_components(ManifoldKind kind) { return kind == ManifoldKind::Sphere ? 2 : 1; }

}  // namespace

std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Interval: return "interval";
    case ManifoldKind::Ring: return "ring";
    case ManifoldKind::Sphere: return "sphere";
  }
  return "?";
}

ManifoldKind manifold_kind_from_string(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "interval") return ManifoldKind::Interval;
  if (lower == "ring") return ManifoldKind::Ring;
  if (lower == "sphere") return ManifoldKind::Sphere;
  throw ModelError("unknown manifold kind '" + name + "' (expected interval, ring or sphere)");
}

VelocityModel::VelocityModel(ManifoldKind kind, expr::Expr density, std::vector<expr::Expr> force,
                             double alpha, std::string name)
    : kind_(kind),
      name_(std::move(name)),
      density_expr_(std::move(density)),
      force_exprs_(std::move(force)),
      alpha_(alpha) {
  if (!(alpha_ > 0.0)) throw ModelError("alpha must be positive");
  if (force_exprs_.size() != force_components(kind_))
    throw ModelError(to_string(kind_) + " expects " + std::to_string(force_components(kind_)) +
                     " force component(s), got " + std::to_string(force_exprs_.size()));
  const auto slots = slots_for(kind_);
  try {
    density_ = expr::Program(density_expr_, slots);
    force_vanishes_ = true;
    for (const auto& f : force_exprs_) {
      force_.emplace_back(f, slots);
      force_vanishes_ = force_vanishes_ && force_.back().is_zero();
    }
  } catch (const expr::EvalError& e) {
    throw ModelError(std::string("expression uses a variable not available on ") + to_string(kind_) +
                     ": " + e.what());
  }
}

int VelocityModel::dim() const {
  switch (kind_) {
    case ManifoldKind::Interval: return 1;
    case ManifoldKind::Ring: return 2;
    case ManifoldKind::Sphere: return 3;
  }
  return 0;
}

double VelocityModel::density(const ChartPoint& c) const {
  return kind_ == ManifoldKind::Sphere ? density_(c.a, c.b) : density_(c.a);
}

std::array<double, 2> VelocityModel::force(const ChartPoint& c) const {
  if (force_vanishes_) return {0.0, 0.0};
  if (kind_ == ManifoldKind::Sphere) return {force_[0](c.a, c.b), force_[1](c.a, c.b)};
  return {force_[0](c.a), 0.0};
}

double VelocityModel::force_norm(const ChartPoint& c) const {
  const auto f = force(c);
  return std::hypot(f[0], f[1]);
}

Vec3 VelocityModel::embed(const ChartPoint& c) const {
  switch (kind_) {
    case ManifoldKind::Interval: return {c.a, 0.0, 0.0};
    case ManifoldKind::Ring: return {std::cos(c.a), std::sin(c.a), 0.0};
    case ManifoldKind::Sphere: {
      const double s = std::sin(c.b);
      return {s * std::cos(c.a), s * std::sin(c.a), std::cos(c.b)};
    }
  }
  return {};
}

ChartPoint VelocityModel::chart_of(const Vec3& x) const {
  switch (kind_) {
    case ManifoldKind::Interval: return {std::clamp(x[0], -1.0, 1.0), 0.0};
    case ManifoldKind::Ring: return wrap({std::atan2(x[1], x[0]), 0.0});
    case ManifoldKind::Sphere: {
      const double r = std::sqrt(dot(x, x));
      const double z = std::clamp(x[2] / r, -1.0, 1.0);
      return wrap({std::atan2(x[1], x[0]), std::acos(z)});
    }
  }
  return {};
}

ChartPoint VelocityModel::wrap(const ChartPoint& c) const {
  if (kind_ == ManifoldKind::Interval) return {std::clamp(c.a, -1.0, 1.0), 0.0};
  double theta = std::fmod(c.a, kTwoPi);
  if (theta < 0.0) theta += kTwoPi;
  if (theta >= kTwoPi) theta -= kTwoPi;
  if (kind_ == ManifoldKind::Ring) return {theta, 0.0};
  return {theta, std::clamp(c.b, 0.0, std::numbers::pi)};
}

double VelocityModel::distance(const ChartPoint& a, const ChartPoint& b) const {
  if (kind_ == ManifoldKind::Interval) return std::abs(a.a - b.a);
  const Vec3 x = embed(a);
  const Vec3 y = embed(b);
  return std::sqrt((x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]) + (x[2] - y[2]) * (x[2] - y[2]));
}

void VelocityModel::check_chart(const ChartPoint& c) const {
  auto out = [](double x, double lo, double hi) { return !(x >= lo - kChartSlack && x <= hi + kChartSlack); };
  switch (kind_) {
    case ManifoldKind::Interval:
      if (out(c.a, -1.0, 1.0)) throw ModelError("velocity " + std::to_string(c.a) + " outside [-1, 1]");
      return;
    case ManifoldKind::Ring:
      if (out(c.a, 0.0, kTwoPi)) throw ModelError("theta " + std::to_string(c.a) + " outside [0, 2pi]");
      return;
    case ManifoldKind::Sphere:
      if (out(c.a, 0.0, kTwoPi)) throw ModelError("theta " + std::to_string(c.a) + " outside [0, 2pi]");
      if (out(c.b, 0.0, std::numbers::pi)) throw ModelError("phi " + std::to_string(c.b) + " outside [0, pi]");
      return;
  }
}

Vec3 embed(const VelocityModel& model, const ChartPoint& c) {
  model.check_chart(c);
  return model.embed(c);
}

namespace {

double sphere_divergence_regular(const VelocityModel& m, double theta, double phi) {
  const double h = kDiffStep;
  const double s = std::sin(phi);
  const double da = (m.force({theta + h, phi})[0] - m.force({theta - h, phi})[0]) / (2.0 * h);
  const double gp = m.force({theta, phi + h})[1] * std::sin(phi + h);
  const double gm = m.force({theta, phi - h})[1] * std::sin(phi - h);
  return (da + (gp - gm) / (2.0 * h)) / s;
}

}  // namespace

double divergence_gamma(const VelocityModel& model, const ChartPoint& c) {
  if (model.force_vanishes()) return 0.0;
  const double h = kDiffStep;
  switch (model.kind()) {
    case ManifoldKind::Interval: {
      auto g = [&](double v) { return model.force({v, 0.0})[0]; };
      // one-sided second-order stencils keep the evaluation inside [-1, 1]
      if (c.a - h < -1.0) return (-3.0 * g(c.a) + 4.0 * g(c.a + h) - g(c.a + 2.0 * h)) / (2.0 * h);
      if (c.a + h > 1.0) return (3.0 * g(c.a) - 4.0 * g(c.a - h) + g(c.a - 2.0 * h)) / (2.0 * h);
      return (g(c.a + h) - g(c.a - h)) / (2.0 * h);
    }
    case ManifoldKind::Ring:
      return (model.force({c.a + h, 0.0})[0] - model.force({c.a - h, 0.0})[0]) / (2.0 * h);
    case ManifoldKind::Sphere: {
      constexpr double kPoleZone = 1e-3;
      const double phi = c.b;
      if (phi > kPoleZone && phi < std::numbers::pi - kPoleZone)
        return sphere_divergence_regular(model, c.a, phi);
      // one-sided limit at the pole, linear extrapolation from two off-pole rings
      const double pole = phi <= kPoleZone ? 0.0 : std::numbers::pi;
      const double dir = pole == 0.0 ? 1.0 : -1.0;
      const double d1 = sphere_divergence_regular(model, c.a, pole + dir * kPoleZone);
      const double d2 = sphere_divergence_regular(model, c.a, pole + dir * 2.0 * kPoleZone);
      const double limit = 2.0 * d1 - d2;
      if (!std::isfinite(limit) || std::abs(d1 - d2) > 1.0)
        throw ModelError("divergence of the force is unbounded at the pole");
      return limit;
    }
  }
  return 0.0;
}

double VelocityGrid::total_weight() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

VelocityGrid make_grid(const VelocityModel& model, std::size_t resolution, std::size_t bands,
                       Quadrature quadrature) {
  if (resolution < 8) throw ModelError("grid resolution below minimum 8");
  VelocityGrid g;
  g.kind = model.kind();
  switch (model.kind()) {
    case ManifoldKind::Interval: {
      g.quadrature = quadrature == Quadrature::GaussLegendre ? Quadrature::GaussLegendre : Quadrature::Trapezoid;
      std::vector<double> x;
      if (g.quadrature == Quadrature::GaussLegendre) {
        gauss_legendre(resolution, x, g.weights);
      } else {
        x.resize(resolution);
        g.weights.assign(resolution, 2.0 / static_cast<double>(resolution - 1));
        for (std::size_t i = 0; i < resolution; ++i)
          x[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(resolution - 1);
        x.back() = 1.0;
        g.weights.front() *= 0.5;
        g.weights.back() *= 0.5;
      }
      for (double v : x) g.nodes.push_back({v, 0.0});
      break;
    }
    case ManifoldKind::Ring: {
      g.quadrature = Quadrature::Trapezoid;
      g.n_theta = resolution;
      for (std::size_t i = 0; i < resolution; ++i)
        g.nodes.push_back({kTwoPi * static_cast<double>(i) / static_cast<double>(resolution), 0.0});
      g.weights.assign(resolution, 1.0 / static_cast<double>(resolution));
      break;
    }
    case ManifoldKind::Sphere: {
      if (bands == 0) bands = resolution / 2;
      if (bands < 8) throw ModelError("grid resolution below minimum 8");
      g.quadrature = Quadrature::GaussLegendre;
      g.n_theta = resolution;
      g.n_band = bands;
      gauss_legendre(bands, g.mu, g.mu_weights);
      for (std::size_t j = 0; j < bands; ++j) {
        const double phi = std::acos(g.mu[j]);
        for (std::size_t i = 0; i < resolution; ++i) {
          g.nodes.push_back({kTwoPi * static_cast<double>(i) / static_cast<double>(resolution), phi});
          g.weights.push_back(g.mu_weights[j] / (2.0 * static_cast<double>(resolution)));
        }
      }
      break;
    }
  }
  g.vectors.reserve(g.nodes.size());
  for (const auto& c : g.nodes) g.vectors.push_back(model.embed(c));
  return g;
}

ValidationReport validate(const VelocityModel& model, std::size_t resolution) {
  ValidationReport r;
  const VelocityGrid grid = make_grid(model, std::max<std::size_t>(resolution, 8));
  std::vector<ChartPoint> points = grid.nodes;
  if (model.kind() == ManifoldKind::Sphere) {
    points.push_back({0.0, 0.0});
    points.push_back({0.0, std::numbers::pi});
  }
  r.min_density = std::numeric_limits<double>::infinity();
  r.min_one_plus_div = std::numeric_limits<double>::infinity();
  r.max_one_plus_div = -std::numeric_limits<double>::infinity();
  for (const auto& c : points) {
    r.min_density = std::min(r.min_density, model.density(c));
    const double d = 1.0 + divergence_gamma(model, c);
    r.min_one_plus_div = std::min(r.min_one_plus_div, d);
    r.max_one_plus_div = std::max(r.max_one_plus_div, d);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) r.density_integral += grid.weights[i] * model.density(grid.nodes[i]);
  if (model.kind() == ManifoldKind::Interval)
    r.boundary_force = std::max(std::abs(model.force({-1.0, 0.0})[0]), std::abs(model.force({1.0, 0.0})[0]));
  r.density_positive = r.min_density > 0.0;
  r.density_normalised = std::abs(r.density_integral - 1.0) <= 1e-6;
  r.divergence_bound = r.min_one_plus_div >= model.alpha() - 1e-9 && r.min_one_plus_div > 0.0;
  r.boundary_null = r.boundary_force <= 1e-12;
  return r;
}

VelocityModel builtin_model(const std::string& name) {
  if (name == "flat-interval")
    return VelocityModel(ManifoldKind::Interval, expr::parse("1/2"), {expr::parse("0")}, 1.0, name);
  if (name == "drift-interval")
    return VelocityModel(ManifoldKind::Interval, expr::parse("1/2"), {expr::parse("0.2*(1-v^2)")}, 0.6, name);
  if (name == "sphere-rotor")
    return VelocityModel(ManifoldKind::Sphere, expr::parse("1"), {expr::parse("sin(phi)"), expr::parse("0")}, 1.0,
                         name);
  throw ModelError("unknown built-in model '" + name + "'");
}

std::vector<std::string> builtin_model_names() { return {"flat-interval", "drift-interval", "sphere-rotor"}; }

}  // namespace kld
