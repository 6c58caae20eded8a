#pragma once

// Flow of -Gamma on the velocity set and classification of its omega-limit
// sets (a zero of Gamma or a periodic orbit).

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "kld/model.hpp"

namespace kld {

struct FlowControls {
  double dt = 1e-3;
  double t_max = 1e4;
  double fixed_tol = 1e-9;   // |Gamma| threshold for fixed-point detection
  int fixed_steps = 100;     // consecutive steps below fixed_tol
  double return_tol = 1e-8;  // closure tolerance between section returns
};

/// Integration coordinates: interval v, ring unwrapped theta, sphere unit
/// vector in R^3 (charts are singular at the poles, the embedding is not).
class FlowField {
public:
  /// The field integrated is sign * Gamma; sign = -1 gives the flow of -Gamma.
  FlowField(const VelocityModel& model, double sign = -1.0);

  const VelocityModel& model() const { return *model_; }
  double sign() const { return sign_; }

  Vec3 to_state(const ChartPoint& c) const;
  ChartPoint to_chart(const Vec3& x) const;
  /// The velocity v in R^d represented by a state.
  Vec3 velocity(const Vec3& x) const;

  Vec3 rate(const Vec3& x) const;
  /// One classical RK4 step, projected back onto V.
  Vec3 step(const Vec3& x, double dt) const;
  /// Projects onto V (clamp, or renormalise on the sphere).
  Vec3 project(const Vec3& x) const;

private:
  const VelocityModel* model_;
  double sign_;
};

struct FlowTrace {
  ChartPoint start;
  double dt = 0.0;
  std::vector<ChartPoint> points;  // points[k] is the state at time k * dt
  double duration = 0.0;
};

FlowTrace integrate_flow(const VelocityModel& model, const ChartPoint& v0, double duration, double dt = 1e-3,
                         double sign = -1.0);

struct FixedPoint {
  ChartPoint w;
};

struct PeriodicOrbit {
  std::vector<ChartPoint> points;  // closed polyline; front and back coincide up to closure error
  std::vector<double> times;       // times[0] = 0, times.back() = period
  double period = 0.0;
};

struct OmegaLimit {
  std::variant<FixedPoint, PeriodicOrbit> set;
  int basin = -1;

  bool is_fixed_point() const { return std::holds_alternative<FixedPoint>(set); }
  const FixedPoint& fixed_point() const { return std::get<FixedPoint>(set); }
  const PeriodicOrbit& orbit() const { return std::get<PeriodicOrbit>(set); }
};

/// Raised when neither a fixed point nor a periodic return is found before
/// t_max, i.e. the data violates the Poincare-Bendixson assumption.
class Unclassified : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One accepted integration step, as seen by a step observer.
struct FlowStep {
  Vec3 x0, x1;  // states at both ends
  Vec3 f0, f1;  // field values at both ends
  double t0 = 0.0;
  double dt = 0.0;
};

struct WalkOutcome {
  OmegaLimit omega;
  std::size_t steps = 0;
  /// For periodic orbits, the index of the first step of the last full period.
  std::size_t period_first_step = 0;
};

using StepObserver = std::function<void(const FlowStep&)>;

/// Integrates the flow from v0 until its omega-limit set is identified,
/// reporting every step to the observer.
WalkOutcome follow_to_omega_limit(const FlowField& field, const ChartPoint& v0, const FlowControls& controls,
                                  const StepObserver& observer = {});

OmegaLimit classify_omega_limit(const VelocityModel& model, const ChartPoint& v0,
                                const FlowControls& controls = {});

/// Time average of f over the omega-limit set.
double orbit_average(const VelocityModel& model, const OmegaLimit& omega,
                     const std::function<double(const ChartPoint&)>& f);

/// Classifies from every seed and keeps the distinct limit sets; `basin` of
/// each result is its index in the returned list.
std::vector<OmegaLimit> find_all_omega_limits(const VelocityModel& model, std::span<const ChartPoint> seeds,
                                              const FlowControls& controls = {});

/// Grid nodes plus the points the grid may miss (interval endpoints, poles).
std::vector<ChartPoint> omega_seed_points(const VelocityModel& model, const VelocityGrid& grid);

/// Same-set test used for deduplication.
bool same_limit_set(const VelocityModel& model, const OmegaLimit& a, const OmegaLimit& b);

}  // namespace kld
