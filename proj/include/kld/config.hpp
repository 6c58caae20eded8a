#pragma once

// Run configuration: INI-like sections with `key = value` lines. Values may
// be bare or double-quoted; expressions are parsed when the file is loaded.
//
//   [model]        builtin | kind, M, gamma (gamma_theta, gamma_phi on the sphere), alpha, name
//   [grid]         nv, bands, quadrature, nx, L
//   [hamiltonian]  p_min, p_max, p_steps, bisect_tol, probe_rel, exponent_cap, rate_eps, flow_dt, x_points
//   [kinetic]      eps, dt, T, phi0, snapshots, nv
//   [hj]           dt, T, alpha, snapshots
//   [simulate]     n, t_final, p, seed, endpoints

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "kld/expr.hpp"
#include "kld/hamiltonian.hpp"
#include "kld/model.hpp"

namespace kld {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ModelBlock {
  std::string builtin;  // non-empty: use the named fixture
  ManifoldKind kind = ManifoldKind::Interval;
  expr::Expr density;
  std::vector<expr::Expr> force;
  double alpha = 0.0;
  std::string name;
};

struct GridBlock {
  std::size_t nv = 256;
  std::size_t bands = 0;  // sphere only; 0 means nv / 2
  Quadrature quadrature = Quadrature::Default;
  std::size_t nx = 256;
  double L = 1.0;
};

struct HamiltonianBlock {
  std::vector<double> p_min{-2.0};  // one entry per axis, or one for all
  std::vector<double> p_max{2.0};
  std::vector<std::size_t> p_steps{41};
  HamiltonianControls controls;
  std::size_t x_points = 0;  // Legendre grid points per axis; 0 picks a default
};

struct KineticBlock {
  std::vector<double> eps{0.4, 0.2, 0.1};
  double dt = 0.0;  // 0: largest stable step
  double T = 0.5;
  expr::Expr phi0;
  std::vector<double> snapshots;
  std::size_t nv = 0;  // 0: use grid.nv
};

struct HJBlock {
  double dt = 0.0;
  double T = 0.5;
  double alpha = 1.0;
  std::vector<double> snapshots;
};

struct SimulateBlock {
  std::size_t n = 10000;
  double t_final = 100.0;
  std::vector<std::vector<double>> p;
  std::uint64_t seed = 1;
  bool endpoints = false;
};

struct RunConfig {
  std::filesystem::path source;
  ModelBlock model;
  GridBlock grid;
  HamiltonianBlock hamiltonian;
  KineticBlock kinetic;
  HJBlock hj;
  SimulateBlock simulate;

  VelocityModel build_model() const;
  /// Axes of the Hamiltonian table, one per embedding dimension.
  std::vector<Axis> table_axes(int dim) const;
};

/// Reads and validates a config file. Errors name the file, the line and
/// the offending key.
RunConfig load_config(const std::filesystem::path& path);
/// Same, from text; `origin` only labels error messages.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");

}  // namespace kld
