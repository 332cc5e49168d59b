#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcpa/analysis.hpp"
#include "mcpa/cpa.hpp"
#include "mcpa/windows.hpp"

namespace mcpa {

// Trace runs feeding one CPA invocation. Paths are resolved against the
// manifest file's directory unless absolute.
struct RunManifest {
  std::string scenario_id;
  std::vector<std::string> baseline;
  std::map<std::string, std::vector<std::string>> shaped;
  std::optional<std::string> click_log;
  nlohmann::json config_overrides;  // alpha_t, alpha_b, percentile, ...
};

RunManifest load_manifest_file(const std::string& path);
nlohmann::json manifest_to_json(const RunManifest& manifest);

// Reads and analyzes every trace in the manifest. `jobs` bounds parallel runs.
ExperimentSet load_experiment_set(const RunManifest& manifest, const AnalysisConfig& cfg,
                                  double throttle_rate, double significance, int target_window,
                                  int jobs = 1);

nlohmann::json window_to_json(const ActivityWindow& window);
nlohmann::json score_to_json(const PartitionScore& score);
nlohmann::json metrics_to_json(const DeliveryMetrics& metrics);
nlohmann::json waterfall_to_json(const Waterfall& waterfall);
nlohmann::json report_to_json(const CriticalReport& report);

}  // namespace mcpa
