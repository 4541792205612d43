// Python bindings: the map family, Ulam matrices, the coboundary scan and the
// experiment harness. Results cross the boundary as lists, dicts and JSON.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "seqpm/config.hpp"
#include "seqpm/errors.hpp"
#include "seqpm/harness.hpp"
#include "seqpm/martingale.hpp"
#include "seqpm/pm_map.hpp"
#include "seqpm/stats.hpp"
#include "seqpm/ulam.hpp"

namespace py = pybind11;
using namespace seqpm;

namespace {

ExperimentConfig config_from(const std::string& text, const std::string& kind) {
  if (kind.empty()) return parse_config(text);
  const auto k = parse_kind(kind);
  if (!k) throw DomainError("unknown experiment kind '" + kind + "'");
  return parse_config(text, *k);
}

py::dict record_dict(const ExperimentRecord& r) {
  auto json = py::module_::import("json");
  py::dict out = json.attr("loads")(summary_json(r).dump());
  py::dict curves;
  for (const auto& [name, curve] : r.curves) {
    py::dict c;
    c["columns"] = curve.columns;
    c["rows"] = curve.rows;
    curves[py::str(name)] = c;
  }
  out["curves"] = curves;
  return out;
}

}  // namespace

PYBIND11_MODULE(_seqpm, m) {
  m.doc() = "Sequential Pomeau-Manneville maps: transfer operators and limit theorems";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<GridBreakdown>(m, "GridBreakdown", PyExc_ArithmeticError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("apply_map", [](double beta, double x) { return apply_map(MapParameter(beta), x); },
        py::arg("beta"), py::arg("x"));
  m.def("map_derivative", [](double beta, double x) { return map_derivative(MapParameter(beta), x); },
        py::arg("beta"), py::arg("x"));
  m.def("inverse_left", [](double beta, double y) { return inverse_left(MapParameter(beta), y); },
        py::arg("beta"), py::arg("y"));
  m.def(
      "orbit",
      [](const std::vector<double>& betas, double x0) {
        const double cap = betas.empty() ? 0.0 : *std::max_element(betas.begin(), betas.end());
        return iterate_schedule(MapSchedule::explicit_list(betas, cap), x0, betas.size());
      },
      py::arg("betas"), py::arg("x0"), "Orbit x0, T_1 x0, ... under the listed parameters.");

  m.def(
      "ulam_matrix",
      [](double beta, std::size_t cells, double grading) {
        const auto op = UlamOperator::build(MapParameter(beta), make_grid(cells, grading));
        py::dict out;
        auto as_list = [](auto span) { return std::vector(span.begin(), span.end()); };
        out["indptr"] = as_list(op.row_offsets());
        out["indices"] = as_list(op.column_indices());
        out["data"] = as_list(op.entries());
        out["cuts"] = as_list(op.grid().cuts());
        return out;
      },
      py::arg("beta"), py::arg("cells") = 1024, py::arg("grading") = 2.0,
      "CSR arrays of the Ulam matrix acting on cell masses, plus the grid cuts.");

  m.def(
      "decomposition",
      [](const std::vector<double>& betas, std::size_t cells, double grading) {
        if (betas.size() < 2) throw DomainError("decomposition: need at least two parameters");
        const double cap = *std::max_element(betas.begin(), betas.end());
        OperatorCache ops(make_grid(cells, grading));
        const auto recs = decomposition_records(MapSchedule::explicit_list(betas, cap),
                                                Observable::identity(), betas.size() - 1, ops);
        py::list out;
        for (const auto& r : recs) {
          py::dict d;
          d["n"] = r.n;
          d["centering"] = r.psi.centering;
          d["v"] = r.psi.second_moment;
          d["sigma2"] = r.sigma2;
          d["Sigma2"] = r.Sigma2;
          d["martingale_residual"] = r.psi.martingale_residual;
          out.append(d);
        }
        return out;
      },
      py::arg("betas"), py::arg("cells") = 2048, py::arg("grading") = 2.0,
      "Grid coboundary scan for phi(x) = x along the listed parameters.");

  m.def("kolmogorov_tail", &kolmogorov_tail, py::arg("lam"));

  m.def("experiment_kinds", &experiment_kind_names);
  m.def(
      "default_config", [](const std::string& kind) { return serialize_config(config_from("", kind)); },
      py::arg("kind"), "Defaults for an experiment kind, as config text.");
  m.def(
      "validate",
      [](const std::string& text, const std::string& kind) {
        try {
          return validate(config_from(text, kind));
        } catch (const ConfigError& e) {
          return e.messages();
        }
      },
      py::arg("text"), py::arg("kind") = "", "Error messages for a config; empty when valid.");
  m.def(
      "run",
      [](const std::string& text, const std::string& kind, unsigned workers) {
        const auto config = config_from(text, kind);
        ExperimentRecord r;
        {
          py::gil_scoped_release release;
          r = run_experiment(config, Parallelism{workers});
        }
        return record_dict(r);
      },
      py::arg("text") = "", py::arg("kind") = "", py::arg("workers") = 1,
      "Run an experiment from config text; returns the summary with curves.");
}
