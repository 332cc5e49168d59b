#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "mcpa/analysis.hpp"
#include "mcpa/cpa.hpp"
#include "mcpa/error.hpp"
#include "mcpa/json_io.hpp"
#include "mcpa/sim.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(to_py(item));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [key, value] : j.items()) out[py::str(key)] = to_py(value);
      return out;
    }
    default: return py::none();
  }
}

mcpa::AnalysisConfig make_config(const std::string& policy, double alpha_t, double alpha_b,
                                 double percentile) {
  mcpa::AnalysisConfig cfg;
  if (policy == "naive")
    cfg.partition.policy = mcpa::PartitionPolicy::Naive;
  else if (policy == "gradient")
    cfg.partition.policy = mcpa::PartitionPolicy::Gradient;
  else
    throw mcpa::Error(mcpa::ErrorCode::InvalidConfig, "unknown policy " + policy);
  cfg.partition.alpha_t = alpha_t;
  cfg.partition.alpha_b = alpha_b;
  cfg.percentile = percentile;
  return cfg;
}

mcpa::ByteEvolution make_evolution(const std::vector<std::pair<double, uint64_t>>& samples) {
  mcpa::ByteEvolution evo;
  evo.samples = samples;
  evo.total_bytes = samples.empty() ? 0 : samples.back().second;
  return evo;
}

}  // namespace

PYBIND11_MODULE(_mcpa, m) {
  m.doc() = "Trace-driven critical path analysis for mobile app traffic";

  py::register_exception<mcpa::Error>(m, "McpaError");

  m.def(
      "partition_file",
      [](const std::string& path, const std::string& policy, double alpha_t, double alpha_b) {
        auto cfg = make_config(policy, alpha_t, alpha_b, 0.95);
        auto events = mcpa::read_trace_file(path);
        auto windows = mcpa::partition(events, cfg.partition);
        json out = json::array();
        for (const auto& w : windows) out.push_back(mcpa::window_to_json(w));
        return to_py(out);
      },
      py::arg("path"), py::arg("policy") = "gradient", py::arg("alpha_t") = 1.0,
      py::arg("alpha_b") = 5000.0, "Split a trace into activity windows.");

  m.def(
      "metrics_file",
      [](const std::string& path, double percentile, const std::string& policy, double alpha_t,
         double alpha_b) {
        auto run =
            mcpa::analyze_trace_file(path, make_config(policy, alpha_t, alpha_b, percentile));
        json out = json::array();
        for (const auto& aw : run.windows) {
          json entry = mcpa::window_to_json(aw.window);
          if (aw.has_data) entry["metrics"] = mcpa::metrics_to_json(aw.metrics);
          out.push_back(std::move(entry));
        }
        return to_py(out);
      },
      py::arg("path"), py::arg("percentile") = 0.95, py::arg("policy") = "gradient",
      py::arg("alpha_t") = 1.0, py::arg("alpha_b") = 5000.0,
      "Per-window delivery metrics (TDT/TDI) for a trace file.");

  m.def(
      "waterfall_file",
      [](const std::string& path, int window, const std::string& fmt) {
        auto run = mcpa::analyze_trace_file(path, make_config("gradient", 1.0, 5000.0, 0.95));
        for (const auto& aw : run.windows) {
          if (aw.window.window_id != window) continue;
          if (fmt == "json") return py::object(to_py(mcpa::waterfall_to_json(aw.waterfall)));
          auto rf = fmt == "svg" ? mcpa::RenderFormat::Svg : mcpa::RenderFormat::Ascii;
          return py::object(py::str(mcpa::render_waterfall(aw.waterfall, rf, nullptr)));
        }
        throw mcpa::Error(mcpa::ErrorCode::MalformedInput, "window not found");
      },
      py::arg("path"), py::arg("window") = 0, py::arg("format") = "ascii",
      "Waterfall of one window as ascii, svg, or a dict.");

  m.def(
      "compute_tdt",
      [](const std::vector<std::pair<double, uint64_t>>& samples, double percentile) {
        return mcpa::compute_tdt(make_evolution(samples), percentile);
      },
      py::arg("samples"), py::arg("percentile") = 0.95,
      "TDT from (ts, cumulative_bytes) samples.");

  m.def(
      "compute_tdi",
      [](const std::vector<std::pair<double, uint64_t>>& samples, double percentile) {
        auto evo = make_evolution(samples);
        return mcpa::compute_tdi(evo, mcpa::compute_tdt(evo, percentile));
      },
      py::arg("samples"), py::arg("percentile") = 0.95,
      "TDI from (ts, cumulative_bytes) samples.");

  m.def(
      "pvalue_test",
      [](const std::vector<double>& baseline, const std::vector<double>& shaped,
         double significance) {
        auto r = mcpa::run_pvalue_test(baseline, shaped, significance);
        return py::make_tuple(r.is_significant, r.per_run_p);
      },
      py::arg("baseline"), py::arg("shaped"), py::arg("significance") = 0.05,
      "All-runs one-sided z-test; returns (is_significant, per_run_p).");

  m.def(
      "classify_domain",
      [](const std::string& domain, const std::set<std::string>& app_domains) {
        mcpa::ClassifyConfig cfg;
        cfg.app_domains = app_domains;
        return std::string(mcpa::to_string(mcpa::classify_domain(domain, cfg)));
      },
      py::arg("domain"), py::arg("app_domains") = std::set<std::string>{},
      "AD_HOC / CDN / OTH_SERV classification.");

  m.def(
      "simulate_report",
      [](const std::string& scenario_path, int runs, std::optional<uint64_t> seed,
         double throttle_rate) {
        auto scenario = mcpa::sim::load_scenario_file(scenario_path);
        if (seed) scenario.seed = *seed;
        mcpa::sim::validate_scenario(scenario);
        auto ex = mcpa::sim::generate_experiment_set(scenario, runs, {}, throttle_rate);
        return to_py(mcpa::report_to_json(mcpa::run_cpa(ex)));
      },
      py::arg("scenario_path"), py::arg("runs") = 10, py::arg("seed") = std::nullopt,
      py::arg("throttle_rate") = 1000.0,
      "Simulate a scenario end to end and return the critical-path report.");

  m.def(
      "cpa_report",
      [](const std::string& manifest_path, double percentile, double significance,
         double throttle_rate, int jobs) {
        auto manifest = mcpa::load_manifest_file(manifest_path);
        auto ex = mcpa::load_experiment_set(manifest, make_config("gradient", 1.0, 5000.0,
                                                                  percentile),
                                            throttle_rate, significance, 0, jobs);
        return to_py(mcpa::report_to_json(mcpa::run_cpa(ex)));
      },
      py::arg("manifest_path"), py::arg("percentile") = 0.95, py::arg("significance") = 0.05,
      py::arg("throttle_rate") = 1000.0, py::arg("jobs") = 1,
      "Critical-path report for an experiment manifest of trace files.");
}
