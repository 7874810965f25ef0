#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dsse/harness.hpp"

namespace py = pybind11;
using namespace dsse;

namespace {

py::dict errors_dict(const RunErrors& e) {
  py::dict d;
  d["mean_err_v"] = e.mean_err_v;
  d["max_err_v"] = e.max_err_v;
  d["mean_err_f"] = e.mean_err_f;
  d["max_err_f"] = e.max_err_f;
  d["outlier_count"] = e.outlier_count;
  d["selection_attempts"] = e.selection_attempts;
  return d;
}

py::dict stats_dict(const ScenarioStats& s) {
  py::dict d;
  d["avg_of_mean_v"] = s.avg_of_mean_v;
  d["avg_of_mean_f"] = s.avg_of_mean_f;
  d["avg_of_max_v"] = s.avg_of_max_v;
  d["avg_of_max_f"] = s.avg_of_max_f;
  d["hw_mean_v"] = s.hw_mean_v;
  d["hw_mean_f"] = s.hw_mean_f;
  d["hw_max_v"] = s.hw_max_v;
  d["hw_max_f"] = s.hw_max_f;
  d["runs"] = s.runs;
  d["failures"] = s.failures;
  d["median_outliers"] = s.median_outliers;
  d["first_draw_observable"] = s.first_draw_observable;
  return d;
}

Preference preference_arg(const std::string& text) {
  auto p = parse_preference(text);
  if (!p) throw py::value_error("preference must be 'nodal' or 'edge'");
  return *p;
}

ScenarioConfig scenario(double e_v, double e_i, const std::string& preference, bool postfilter,
                        std::optional<std::pair<double, double>> fractions) {
  ScenarioConfig cfg;
  cfg.e_v = e_v;
  cfg.e_i = e_i;
  cfg.preference = preference_arg(preference);
  cfg.postfilter = postfilter;
  if (fractions) cfg.fractions = Fractions{fractions->first, fractions->second};
  cfg.noise().validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Angle-free state estimation for radial distribution feeders";

  static py::exception<Error> base_error(m, "DsseError", PyExc_RuntimeError);
  static py::exception<ObservabilityError> obs_error(m, "ObservabilityError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ObservabilityError& e) {
      py::set_error(obs_error, e.what());
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  py::class_<NetworkModel>(m, "Network")
      .def_static("load", [](const std::string& path) { return load_network(path); }, py::arg("path"))
      .def_static("from_json", [](const std::string& text) { return NetworkModel(parse_network_data(text)); },
                  py::arg("text"))
      .def("to_json", [](const NetworkModel& n) { return dump_network(n.data()); })
      .def_property_readonly("name", [](const NetworkModel& n) { return n.data().name; })
      .def_property_readonly("bus_count", &NetworkModel::bus_count)
      .def_property_readonly("line_count", &NetworkModel::line_count)
      .def_property_readonly("state_dim", [](const NetworkModel& n) { return make_layout(n).dim(); })
      .def_property_readonly("slack", [](const NetworkModel& n) { return n.buses()[n.slack()].id; })
      .def_property_readonly("bus_ids",
                             [](const NetworkModel& n) {
                               std::vector<std::string> ids;
                               for (int b : n.rooted_order()) ids.push_back(n.buses()[b].id);
                               return ids;
                             })
      .def("__repr__", [](const NetworkModel& n) {
        return "<Network '" + n.data().name + "': " + std::to_string(n.bus_count()) + " buses, " +
               std::to_string(n.line_count()) + " lines>";
      });

  m.def(
      "validate",
      [](const std::string& text) {
        std::vector<std::tuple<std::string, std::string, std::string>> out;
        for (const auto& f : validate_radial(parse_network_data(text)).findings) out.emplace_back(f.code, f.element, f.message);
        return out;
      },
      py::arg("text"), "Radiality findings of a network document as (code, element, message) tuples.");

  py::class_<PowerFlowSolution>(m, "Solution")
      .def_readonly("converged", &PowerFlowSolution::converged)
      .def_readonly("iterations", &PowerFlowSolution::iterations)
      .def_property_readonly("method", [](const PowerFlowSolution& s) { return std::string(to_string(s.method)); })
      .def_readonly("v_sq", &PowerFlowSolution::v_sq)
      .def_readonly("flow_p", &PowerFlowSolution::flow_p)
      .def_readonly("flow_q", &PowerFlowSolution::flow_q)
      .def("to_json", [](const PowerFlowSolution& s, const NetworkModel& n) { return dump_solution(n, s); },
           py::arg("network"))
      .def_static(
          "from_json", [](const NetworkModel& n, const std::string& text) { return parse_solution(n, text); },
          py::arg("network"), py::arg("text"));

  m.def(
      "solve",
      [](const NetworkModel& net, std::uint64_t seed, std::optional<std::string> dispatch, const std::string& method,
         int max_iter) {
        Dispatch d;
        if (dispatch) {
          d = parse_dispatch(net, *dispatch);
        } else {
          auto rng = make_stream(seed, 0, StreamTag::dispatch);
          d = generate_dispatch(net, rng, {});
        }
        if (method == "linear") return solve_linear(net, d);
        if (method != "exact") throw py::value_error("method must be 'exact' or 'linear'");
        ExactOptions opt;
        opt.max_iter = max_iter;
        py::gil_scoped_release release;
        return solve_exact(net, d, opt);
      },
      py::arg("network"), py::arg("seed") = 1, py::arg("dispatch") = py::none(), py::arg("method") = "exact",
      py::arg("max_iter") = ExactOptions{}.max_iter,
      "Power flow for a random dispatch drawn from `seed`, or for a dispatch document.");

  m.def(
      "estimate",
      [](const NetworkModel& net, const PowerFlowSolution& truth, double e_v, double e_i, const std::string& preference,
         std::uint64_t seed, bool postfilter, std::optional<std::pair<double, double>> fractions) {
        const auto cfg = scenario(e_v, e_i, preference, postfilter, fractions);
        RunDetail detail;
        {
          py::gil_scoped_release release;
          detail = estimate_from_truth(net, truth, cfg, seed);
        }
        py::dict out = errors_dict(detail.errors);
        out["estimate"] = dump_estimate(net, detail.estimate);
        out["rank"] = detail.estimate.rank;
        out["rows"] = detail.set.measurements.size();
        return out;
      },
      py::arg("network"), py::arg("truth"), py::arg("e_v") = 0.001, py::arg("e_i") = 0.001,
      py::arg("preference") = "nodal", py::arg("seed") = 1, py::arg("postfilter") = false,
      py::arg("fractions") = py::none());

  m.def(
      "run_scenario",
      [](const NetworkModel& net, double e_v, double e_i, const std::string& preference, int dispatch_count,
         std::uint64_t master_seed, bool postfilter, int jobs) {
        auto cfg = scenario(e_v, e_i, preference, postfilter, std::nullopt);
        cfg.dispatch_count = dispatch_count;
        cfg.master_seed = master_seed;
        ScenarioStats s;
        {
          py::gil_scoped_release release;
          s = run_scenario(net, cfg, jobs);
        }
        return stats_dict(s);
      },
      py::arg("network"), py::arg("e_v") = 0.001, py::arg("e_i") = 0.001, py::arg("preference") = "nodal",
      py::arg("dispatch_count") = 200, py::arg("master_seed") = 1, py::arg("postfilter") = false, py::arg("jobs") = 1);
}
