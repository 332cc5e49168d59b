#include "mcpa/json_io.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <semaphore>

#include "mcpa/error.hpp"

namespace mcpa {

namespace {

using nlohmann::json;

std::string resolve(const std::filesystem::path& base, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p.string();
  return (base / p).string();
}

}  // namespace

RunManifest load_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open " + path);
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedInput, std::string("manifest: ") + e.what());
  }
  try {
    auto base = std::filesystem::path(path).parent_path();
    RunManifest m;
    m.scenario_id = obj.value("scenario_id", "scenario");
    for (const auto& p : obj.at("baseline")) m.baseline.push_back(resolve(base, p));
    const json shaped = obj.value("shaped", json::object());
    for (const auto& [domain, paths] : shaped.items())
      for (const auto& p : paths) m.shaped[domain].push_back(resolve(base, p));
    if (obj.contains("click_log") && !obj["click_log"].is_null())
      m.click_log = resolve(base, obj["click_log"].get<std::string>());
    m.config_overrides = obj.value("config", json::object());
    for (const auto& p : m.baseline)
      if (!std::filesystem::exists(p))
        throw Error(ErrorCode::MalformedInput, "manifest references missing file " + p);
    for (const auto& [domain, paths] : m.shaped)
      for (const auto& p : paths)
        if (!std::filesystem::exists(p))
          throw Error(ErrorCode::MalformedInput, "manifest references missing file " + p);
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("manifest: ") + e.what());
  }
}

nlohmann::json manifest_to_json(const RunManifest& manifest) {
  json obj;
  obj["scenario_id"] = manifest.scenario_id;
  obj["baseline"] = manifest.baseline;
  obj["shaped"] = json::object();
  for (const auto& [domain, paths] : manifest.shaped) obj["shaped"][domain] = paths;
  if (manifest.click_log) obj["click_log"] = *manifest.click_log;
  if (!manifest.config_overrides.is_null() && !manifest.config_overrides.empty())
    obj["config"] = manifest.config_overrides;
  return obj;
}

ExperimentSet load_experiment_set(const RunManifest& manifest, const AnalysisConfig& cfg,
                                  double throttle_rate, double significance, int target_window,
                                  int jobs) {
  if (manifest.baseline.empty())
    throw Error(ErrorCode::InsufficientBaseline, "manifest has no baseline runs");
  if (manifest.shaped.empty())
    throw Error(ErrorCode::MissingShapedRuns, "manifest has no shaped runs");
  if (jobs < 1) jobs = 1;

  std::counting_semaphore<256> slots(std::min(jobs, 256));
  auto analyze_async = [&](const std::string& path) {
    return std::async(std::launch::async, [&, path] {
      slots.acquire();
      struct Release {
        std::counting_semaphore<256>& s;
        ~Release() { s.release(); }
      } release{slots};
      return analyze_trace_file(path, cfg);
    });
  };

  std::vector<std::future<AnalyzedRun>> baseline_futs;
  for (const auto& p : manifest.baseline) baseline_futs.push_back(analyze_async(p));
  std::map<std::string, std::vector<std::future<AnalyzedRun>>> shaped_futs;
  for (const auto& [domain, paths] : manifest.shaped)
    for (const auto& p : paths) shaped_futs[domain].push_back(analyze_async(p));

  ExperimentSet ex;
  ex.scenario_id = manifest.scenario_id;
  ex.throttle_rate = throttle_rate;
  ex.significance = significance;
  ex.target_window = target_window;
  ex.runs_per_condition = static_cast<int>(manifest.baseline.size());
  for (auto& f : baseline_futs) ex.baseline_runs.push_back(f.get());
  for (auto& [domain, futs] : shaped_futs)
    for (auto& f : futs) ex.shaped_runs[domain].push_back(f.get());
  return ex;
}

nlohmann::json window_to_json(const ActivityWindow& window) {
  return json{{"window_id", window.window_id},
              {"start_ts", window.start_ts},
              {"end_ts", window.end_ts},
              {"total_bytes", window.total_bytes},
              {"flows", window.flows}};
}

nlohmann::json score_to_json(const PartitionScore& score) {
  return json{{"precision", score.precision}, {"recall", score.recall}};
}

nlohmann::json metrics_to_json(const DeliveryMetrics& metrics) {
  return json{{"tdt_s", metrics.tdt},
              {"tdi_s", metrics.tdi},
              {"percentile", metrics.percentile},
              {"total_bytes", metrics.total_bytes}};
}

nlohmann::json waterfall_to_json(const Waterfall& waterfall) {
  json rows = json::array();
  for (const auto& row : waterfall.rows) {
    json phases = json::array();
    for (const auto& p : row.phases)
      phases.push_back({{"kind", to_string(p.kind)},
                        {"start_ts", p.start_ts},
                        {"end_ts", p.end_ts},
                        {"bytes", p.bytes}});
    rows.push_back({{"flow_id", row.flow_id},
                    {"domain", row.domain},
                    {"label", row.label},
                    {"rtt_defaulted", row.rtt_defaulted},
                    {"phases", std::move(phases)}});
  }
  json completion = json::object();
  for (const auto& [domain, t] : waterfall.domain_completion) completion[domain] = t;
  return json{{"window_id", waterfall.window_id},
              {"start_ts", waterfall.start_ts},
              {"end_ts", waterfall.end_ts},
              {"rows", std::move(rows)},
              {"domain_completion", std::move(completion)}};
}

nlohmann::json report_to_json(const CriticalReport& report) {
  json edges = json::array();
  for (const auto& [x, y] : report.dependency_edges) edges.push_back({x, y});
  json pvals = json::object();
  for (const auto& [domain, ps] : report.per_domain_p) pvals[domain] = ps;
  json classes = json::object();
  for (const auto& [cls, share] : report.class_breakdown)
    classes[to_string(cls)] = {{"time_share", share.time_share},
                               {"byte_share", share.byte_share}};
  return json{
      {"scenario_id", report.scenario_id},
      {"critical_set", report.critical_set},
      {"dependencies", std::move(edges)},
      {"critical_flows", report.critical_flows},
      {"time_on_cp_s", report.time_on_cp},
      {"breakdown",
       {{"dns_s", report.time_on_cp_breakdown.dns},
        {"handshake_s", report.time_on_cp_breakdown.handshake},
        {"data_s", report.time_on_cp_breakdown.data}}},
      {"volume",
       {{"critical_bytes", report.volume_breakdown.critical_bytes},
        {"total_bytes", report.volume_breakdown.total_bytes},
        {"critical_flows_count", report.volume_breakdown.critical_flows_count},
        {"total_flows_count", report.volume_breakdown.total_flows_count}}},
      {"classes", std::move(classes)},
      {"per_domain_p", std::move(pvals)}};
}

}  // namespace mcpa
