#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "kld/cli.hpp"
#include "kld/config.hpp"
#include "kld/hamiltonian.hpp"
#include "kld/model.hpp"
#include "kld/parallel.hpp"
#include "kld/pdmp.hpp"
#include "kld/stationary.hpp"

namespace py = pybind11;
using namespace kld;

namespace {

ChartPoint chart(const std::vector<double>& c) {
  if (c.empty() || c.size() > 2) throw py::value_error("chart point needs 1 or 2 coordinates");
  return {c[0], c.size() > 1 ? c[1] : 0.0};
}

Quadrature quadrature_of(const std::string& name) {
  if (name.empty() || name == "default") return Quadrature::Default;
  if (name == "trapezoid") return Quadrature::Trapezoid;
  if (name == "gauss-legendre") return Quadrature::GaussLegendre;
  throw py::value_error("unknown quadrature '" + name + "'");
}

// The solver keeps references to its model and profile, so it owns copies.
struct SolverHandle {
  std::shared_ptr<const VelocityModel> model;
  std::shared_ptr<const StationaryProfile> profile;
  std::unique_ptr<HamiltonianSolver> solver;
};

py::dict to_dict(const SpectralSolution& s) {
  py::dict d;
  d["p"] = s.p;
  d["H"] = s.H;
  d["H_crit"] = s.H_crit;
  d["integral"] = s.integral;
  d["singular"] = s.singular;
  d["mass_deficit"] = s.mass_deficit;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Velocity-jump process toolkit: stationary laws, Hamiltonians, simulation.";

  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<HamiltonianError>(m, "HamiltonianError", PyExc_RuntimeError);
  py::register_exception<PdmpError>(m, "PdmpError", PyExc_RuntimeError);

  py::class_<VelocityModel>(m, "Model")
      .def_property_readonly("kind", [](const VelocityModel& v) { return to_string(v.kind()); })
      .def_property_readonly("name", &VelocityModel::name)
      .def_property_readonly("alpha", &VelocityModel::alpha)
      .def_property_readonly("dim", &VelocityModel::dim)
      .def("density", [](const VelocityModel& v, const std::vector<double>& c) { return v.density(chart(c)); })
      .def("force", [](const VelocityModel& v, const std::vector<double>& c) { return v.force(chart(c)); })
      .def("__repr__", [](const VelocityModel& v) { return "<kld.Model " + v.name() + " on " + to_string(v.kind()) + ">"; });

  m.def("builtin_model", &builtin_model, py::arg("name"));
  m.def("builtin_model_names", &builtin_model_names);
  m.def("load_model", [](const std::filesystem::path& p) { return load_config(p).build_model(); }, py::arg("path"),
        "Model described by the [model] section of a config file.");

  m.def(
      "validate",
      [](const VelocityModel& model, std::size_t resolution) {
        const auto r = validate(model, resolution);
        py::dict d;
        d["min_density"] = r.min_density;
        d["density_integral"] = r.density_integral;
        d["min_one_plus_div"] = r.min_one_plus_div;
        d["max_one_plus_div"] = r.max_one_plus_div;
        d["boundary_force"] = r.boundary_force;
        d["passed"] = r.passed();
        return d;
      },
      py::arg("model"), py::arg("resolution") = 256);

  py::class_<StationaryProfile, std::shared_ptr<StationaryProfile>>(m, "StationaryProfile")
      .def_readonly("values", &StationaryProfile::values)
      .def_property_readonly("nodes",
                             [](const StationaryProfile& s) {
                               std::vector<std::array<double, 2>> out;
                               for (const auto& c : s.grid.nodes) out.push_back({c.a, c.b});
                               return out;
                             })
      .def_property_readonly("weights", [](const StationaryProfile& s) { return s.grid.weights; })
      .def("mass", &StationaryProfile::mass)
      .def("min", &StationaryProfile::min)
      .def("max", &StationaryProfile::max)
      .def("value_at", [](const StationaryProfile& s, const std::vector<double>& c) { return s.value_at(chart(c)); });

  m.def(
      "solve_stationary",
      [](const VelocityModel& model, std::size_t nv, std::size_t bands, const std::string& quadrature) {
        const auto grid = make_grid(model, nv, bands, quadrature_of(quadrature));
        return std::make_shared<StationaryProfile>(solve_stationary(model, grid));
      },
      py::arg("model"), py::arg("nv") = 256, py::arg("bands") = 0, py::arg("quadrature") = "default");

  py::class_<SolverHandle>(m, "HamiltonianSolver")
      .def(py::init([](const VelocityModel& model, const std::shared_ptr<StationaryProfile>& profile) {
             auto h = std::make_unique<SolverHandle>();
             h->model = std::make_shared<const VelocityModel>(model);
             h->profile = profile;
             h->solver = std::make_unique<HamiltonianSolver>(*h->model, *h->profile);
             return h;
           }),
           py::arg("model"), py::arg("profile"))
      .def(
          "solve",
          [](const SolverHandle& h, const std::vector<double>& p) {
            auto s = h.solver->solve(p);
            auto d = to_dict(s);
            d["residual"] = h.solver->eigen_residual(s);
            return d;
          },
          py::arg("p"))
      .def("critical_H", [](const SolverHandle& h, const std::vector<double>& p) { return h.solver->critical_H(p); },
           py::arg("p"));

  m.def(
      "hamiltonian_table",
      [](const SolverHandle& h, const std::vector<std::tuple<double, double, std::size_t>>& axes) {
        std::vector<Axis> ax;
        for (const auto& [lo, hi, n] : axes) ax.push_back({lo, hi, n});
        const auto t = build_table(*h.solver, ax);
        py::dict d;
        d["p"] = t.p;
        d["H"] = t.H;
        d["H_crit"] = t.H_crit;
        d["residual"] = t.residual;
        d["lipschitz"] = t.lipschitz;
        d["convex"] = table_convex(t);
        return d;
      },
      py::arg("solver"), py::arg("axes"), "Table of H over a grid given as (min, max, nodes) per axis.");

  m.def(
      "simulate_one",
      [](const VelocityModel& model, double t_final, std::uint64_t seed) {
        const auto tr = simulate_one(model, t_final, seed);
        py::dict d;
        d["jump_times"] = tr.jump_times;
        d["positions"] = tr.positions;
        d["velocities"] = tr.velocities;
        d["final_x"] = tr.final_x;
        d["final_v"] = tr.final_v;
        return d;
      },
      py::arg("model"), py::arg("t_final"), py::arg("seed"));

  m.def(
      "ensemble",
      [](const VelocityModel& model, std::size_t n, double t_final, const std::vector<std::vector<double>>& p_list,
         std::uint64_t base_seed) {
        EnsembleStats st;
        {
          py::gil_scoped_release release;
          st = ensemble(model, n, t_final, p_list, base_seed);
        }
        py::dict d;
        d["n"] = st.n;
        d["t_final"] = st.t_final;
        d["mean_velocity"] = st.mean_velocity;
        d["mean_velocity_se"] = st.mean_velocity_se;
        d["covariance"] = st.covariance;
        d["jumps_per_time"] = st.jumps_per_time;
        py::list cgf;
        for (const auto& c : st.cgf) cgf.append(py::make_tuple(c.p, c.value, c.std_error));
        d["cgf"] = cgf;
        return d;
      },
      py::arg("model"), py::arg("n"), py::arg("t_final"), py::arg("p_list") = std::vector<std::vector<double>>{},
      py::arg("base_seed") = 1);

  m.def("set_thread_count", &set_thread_count, py::arg("n"));
  m.def("subcommands", &subcommands);
  m.def(
      "run",
      [](const std::string& name, const std::filesystem::path& config, const std::filesystem::path& out,
         std::optional<std::uint64_t> seed) {
        const auto cfg = load_config(config);
        py::gil_scoped_release release;
        return dispatch(name, cfg, out, DispatchOptions{seed});
      },
      py::arg("subcommand"), py::arg("config"), py::arg("out"), py::arg("seed") = std::nullopt,
      "Runs a command line subcommand and returns its exit code.");
}
