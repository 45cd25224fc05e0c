#include "kvflow/errors.hpp"
#include "kvflow/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace kvflow;

namespace {

py::dict rows_to_dict(const std::vector<SeriesRow>& rows) {
  const std::pair<const char*, double SeriesRow::*> columns[] = {
      {"t", &SeriesRow::t},
      {"E_kin", &SeriesRow::E_kin},
      {"E_sto", &SeriesRow::E_sto},
      {"D_cum", &SeriesRow::D_cum},
      {"W_cum", &SeriesRow::W_cum},
      {"residual", &SeriesRow::residual},
      {"residual_rel", &SeriesRow::residual_rel},
      {"F_L2", &SeriesRow::F_L2},
      {"gradF_L2", &SeriesRow::gradF_L2},
      {"v_L2", &SeriesRow::v_L2},
      {"gradv_Linf", &SeriesRow::gradv_Linf},
      {"gradE_Lp", &SeriesRow::gradE_Lp},
      {"min_detF", &SeriesRow::min_detF},
      {"det_defect", &SeriesRow::det_defect},
      {"return_map_defect", &SeriesRow::return_map_defect},
  };
  py::dict out;
  for (const auto& [name, member] : columns) {
    Eigen::VectorXd col(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) col(static_cast<Eigen::Index>(i)) = rows[i].*member;
    out[name] = col;
  }
  return out;
}

py::dict sweep_to_dict(const SweepResult& r) {
  std::vector<double> values, metrics;
  for (const SweepRow& row : r.rows) {
    values.push_back(row.value);
    metrics.push_back(row.metric);
  }
  py::dict out;
  out["values"] = values;
  out["metrics"] = metrics;
  out["slope"] = r.slope;
  out["monotone"] = r.monotone;
  out["complete"] = r.complete;
  out["error"] = r.error;
  return out;
}

}  // namespace

PYBIND11_MODULE(_kvflow, m) {
  m.doc() = "Kelvin-Voigt visco-elastodynamics on a rectangle";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<RunConfig>(m, "RunConfig")
      .def_readwrite("name", &RunConfig::name)
      .def_readwrite("nx", &RunConfig::nx)
      .def_readwrite("ny", &RunConfig::ny)
      .def_readwrite("t_end", &RunConfig::t_end)
      .def_readwrite("dt", &RunConfig::dt)
      .def_readwrite("output_dir", &RunConfig::output_dir)
      .def_readwrite("sample_stride", &RunConfig::sample_stride)
      .def_property(
          "eps", [](const RunConfig& c) { return c.material.eps; },
          [](RunConfig& c, double v) { c.material.eps = v; })
      .def_property(
          "bulk", [](const RunConfig& c) { return c.material.bulk; },
          [](RunConfig& c, double v) { c.material.bulk = v; })
      .def("serialize", &serialize_config)
      .def("validate", [](const RunConfig& c) { validate_config(c); })
      .def("__eq__", [](const RunConfig& a, const RunConfig& b) { return a == b; });

  m.def("parse_config", [](const std::string& text) {
    std::vector<std::string> warnings;
    RunConfig c = parse_config(text, &warnings);
    return py::make_tuple(c, warnings);
  }, py::arg("text"), "Parse configuration text; returns (config, warnings).");
  m.def("load_config", [](const std::string& path) { return load_config(path); }, py::arg("path"));

  m.def(
      "simulate",
      [](const RunConfig& c) {
        validate_config(c);
        RunResult r;
        {
          py::gil_scoped_release release;
          const Dynamics dyn(make_scenario(c));
          RunOptions opt;
          opt.sample_stride = c.sample_stride;
          r = run_trajectory(dyn, opt);
        }
        py::dict out = rows_to_dict(r.rows);
        out["aborted"] = r.aborted;
        out["error"] = r.error;
        out["steps"] = r.steps;
        out["max_residual_rel"] = r.max_residual_rel;
        out["div_v_space_time"] = r.div_v_space_time;
        return out;
      },
      py::arg("config"), "Run in memory; returns the time series as arrays.");

  m.def(
      "run",
      [](const RunConfig& c) {
        const RunSummary s = run_scenario(c);
        return py::make_tuple(s.exit_code, s.csv_path, s.snapshot_paths);
      },
      py::arg("config"), "Run and write CSV and snapshots; returns (exit_code, csv, snapshots).");

  m.def(
      "sweep_k",
      [](const RunConfig& c, const std::vector<double>& ks, const std::string& mode) {
        return sweep_to_dict(sweep_incompressible_limit(c, ks, bulk_mode_from_string(mode)));
      },
      py::arg("config"), py::arg("values"), py::arg("mode") = "viscous");
  m.def(
      "sweep_eps",
      [](const RunConfig& c, const std::vector<double>& eps) { return sweep_to_dict(sweep_epsilon(c, eps)); },
      py::arg("config"), py::arg("values"));

  m.def(
      "verify",
      [](const RunConfig& c, std::uint64_t seed) {
        py::list out;
        for (const PropertyCheck& p : verify_properties(c, seed)) {
          out.append(py::make_tuple(p.name, p.value, p.tolerance, p.pass));
        }
        return out;
      },
      py::arg("config"), py::arg("seed") = 12345);

  m.def(
      "stored_energy",
      [](const Mat2& F, double bulk, double shear, double eta) {
        MaterialParams p;
        p.bulk = bulk;
        p.shear = shear;
        p.eta = eta;
        const StoredEnergyModel model =
            StoredEnergyModel::from(p, eta > 0.0 ? EnergyKind::regularized_svk : EnergyKind::svk);
        return py::make_tuple(stored_energy(F, model), stored_energy_derivative(F, model));
      },
      py::arg("F"), py::arg("bulk") = 1.0, py::arg("shear") = 1.0, py::arg("eta") = 0.1,
      "Returns (phi, dphi/dF) for a 2x2 deformation gradient.");
}
