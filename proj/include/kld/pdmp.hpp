#pragma once

// Direct simulation of the velocity-jump process: runs with dX = V dt,
// dV = Gamma(V) dt, interrupted at unit rate by a fresh velocity drawn from M.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "kld/flow.hpp"
#include "kld/model.hpp"

namespace kld {

class PdmpError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
double uniform01(std::mt19937_64& rng);

/// Draws velocities with law M. Interval and ring use inverse interpolation
/// on a cumulative table; the sphere uses rejection against max M.
class VelocitySampler {
public:
  static constexpr std::size_t kTableNodes = 2048;

  explicit VelocitySampler(const VelocityModel& model);
  ChartPoint operator()(std::mt19937_64& rng) const;
  /// Cumulative distribution at a chart coordinate (interval and ring only).
  double cdf(double a) const;
  /// Estimated acceptance probability of the sphere rejection step.
  double acceptance() const { return acceptance_; }

private:
  const VelocityModel* model_;
  std::vector<double> coord_;  // table abscissae
  std::vector<double> cum_;    // normalised cumulative mass, cum_.back() == 1
  double envelope_ = 0.0;
  double acceptance_ = 1.0;
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::vector<double> jump_times;
  std::vector<Vec3> positions;   // X at each jump, then at t_final
  std::vector<Vec3> velocities;  // V at t = 0 and after each jump
  Vec3 final_x{};
  Vec3 final_v{};
};

/// One trajectory on [0, t_final], started from the stationary velocity law.
/// Between jumps the run ODE uses RK4 with dt = min(1e-2, gap / 10); with a
/// vanishing force the run is integrated exactly.
Trajectory simulate_one(const VelocityModel& model, const VelocitySampler& sampler, double t_final,
                        std::uint64_t seed);
Trajectory simulate_one(const VelocityModel& model, double t_final, std::uint64_t seed);

struct CgfEstimate {
  std::vector<double> p;
  double value = 0.0;     // (1/t) log mean exp(p . X_t)
  double std_error = 0.0;  // jackknife
};

struct EnsembleStats {
  std::size_t n = 0;
  double t_final = 0.0;
  int dim = 1;
  std::vector<double> mean_velocity;     // mean of X_t / t
  std::vector<double> mean_velocity_se;  // its standard error
  std::vector<double> covariance;        // of X_t / sqrt(t), dim x dim row-major
  double jumps_per_time = 0.0;
  std::vector<CgfEstimate> cgf;
  std::vector<Vec3> endpoints;  // X_t per trajectory, in seed order
};

/// Trajectories use seeds base_seed + k, k < n, and run in parallel; all
/// reductions happen afterwards in seed order, so the result does not
/// depend on the thread count.
EnsembleStats ensemble(const VelocityModel& model, std::size_t n, double t_final,
                       const std::vector<std::vector<double>>& p_list, std::uint64_t base_seed);

/// Log-mean-exp estimate with leave-one-out jackknife error.
CgfEstimate cgf_estimate(const std::vector<double>& exponents, double t_final);

}  // namespace kld
