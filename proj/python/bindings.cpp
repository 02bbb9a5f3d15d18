#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fdsel/effectsize.hpp"
#include "fdsel/error.hpp"
#include "fdsel/evaluate.hpp"
#include "fdsel/io.hpp"
#include "fdsel/iwt.hpp"
#include "fdsel/pipeline.hpp"
#include "fdsel/plot.hpp"
#include "fdsel/simulate.hpp"
#include "fdsel/splinefit.hpp"

namespace py = pybind11;
using namespace fdsel;

namespace {

Json parse(const std::string& text) { return text.empty() ? Json::object() : Json::parse(text); }

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Robust functional domain selection";
  mod.attr("__version__") = kVersion;

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error;
  error.call_once_and_store_result([&] { return py::exception<Error>(mod, "FdselError"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error.get_stored(), e.what());
    }
  });

  mod.def("exit_code_for", [](const std::string& name) {
    for (int c = 0; c <= int(ErrorCode::UnknownPreset); ++c)
      if (to_string(ErrorCode(c)) == name) return exit_code(ErrorCode(c));
    throw py::value_error("unknown error code " + name);
  });

  mod.def("huber_rho", &huber_rho, py::arg("x"), py::arg("delta"));
  mod.def("exp_covariance", &exp_covariance, py::arg("distance"), py::arg("sigma_e"), py::arg("phi"));

  mod.def(
      "simulate",
      [](const std::string& config) {
        const auto sc = scenario_from_json(parse(config));
        const auto sim = simulate(sc);
        std::ostringstream csv;
        write_long_csv(csv, sim.dataset);
        return py::make_tuple(csv.str(), to_json(sim.truth, sc).dump());
      },
      py::arg("config") = "{}",
      "Scenario JSON in; (long CSV text, truth JSON text) out.");

  mod.def(
      "arcs",
      [](std::size_t m) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& a : enumerate_arcs(m).arcs()) out.push_back({a.start, a.length});
        return out;
      },
      py::arg("m"));

  mod.def(
      "adjust",
      [](const std::vector<double>& arc_pvalues, std::size_t m) {
        const auto r = adjust(arc_pvalues, enumerate_arcs(m));
        return py::make_tuple(r.unadjusted, r.adjusted);
      },
      py::arg("arc_pvalues"), py::arg("m"));

  mod.def("pointwise_statistic", &pointwise_statistic, py::arg("group_values"), py::arg("group_sizes"));

  mod.def(
      "aggregate",
      [](const std::vector<double>& grid, const std::vector<double>& fsnr2) {
        const Grid g(grid);
        const auto map = aggregate(g, fsnr2, default_ladder(g));
        return py::make_tuple(map.ladder, map.values, map.triangle);
      },
      py::arg("grid"), py::arg("fsnr2"));

  mod.def(
      "heatmap_svg",
      [](const std::vector<double>& grid, const std::vector<double>& fsnr2) {
        const Grid g(grid);
        EffectSizeResult res;
        EffectSizeOrder o;
        o.fsnr2 = fsnr2;
        o.map = aggregate(g, fsnr2, default_ladder(g));
        res.orders.push_back(std::move(o));
        return heatmap_svg(g, res);
      },
      py::arg("grid"), py::arg("fsnr2"));

  mod.def(
      "score",
      [](const std::vector<std::size_t>& truth, const std::vector<std::size_t>& selected, std::size_t m) {
        GroundTruth t;
        t.grid.assign(m, 0.0);
        t.separable_set = truth;
        const auto s = score(t, selected);
        py::dict d;
        d["sensitivity"] = s.sensitivity ? py::object(py::float_(*s.sensitivity)) : py::object(py::none());
        d["frr"] = s.frr;
        d["false_rejection_present"] = s.false_rejection_present;
        return d;
      },
      py::arg("truth"), py::arg("selected"), py::arg("m"));

  mod.def(
      "run_pipeline",
      [](const std::string& config) {
        PipelineConfig pc;
        update_from_json(pc, parse(config));
        PipelineOutcome out;
        {
          py::gil_scoped_release release;
          out = run_pipeline(pc);
        }
        return py::make_tuple(out.exit_code, out.manifest.dump());
      },
      py::arg("config"),
      "Pipeline JSON in; (exit code, manifest JSON text) out.");
}
