#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcpa/analysis.hpp"
#include "mcpa/cpa.hpp"
#include "mcpa/trace.hpp"

namespace mcpa::sim {

struct BurstSpec {
  uint64_t bytes = 0;
  double duration = 0.1;    // nominal seconds
  double gap_before = 0.0;  // idle before this burst, after the previous phase
};

struct FlowSpec {
  double start_offset = 0.0;          // relative to the flow's anchor
  int window = 0;                     // index into click_times
  std::string after_flow;             // "domain" or "domain:index"; anchor = that flow's end
  double dns_duration = 0.020;        // 0 disables the DNS lookup
  double handshake_duration = 0.050;
  std::vector<BurstSpec> bursts;
};

struct DomainSpec {
  std::string name;
  std::string class_hint;  // AD_HOC / CDN / OTH_SERV, informational
  std::vector<FlowSpec> flows;
};

struct NoiseSpec {
  double timing_jitter_sd = 0.020;    // Gaussian on phase starts, truncated at 0
  double byte_jitter_fraction = 0.0;  // relative jitter on burst sizes
};

struct SimScenario {
  std::string scenario_id;
  std::vector<DomainSpec> domains;
  std::vector<std::pair<std::string, std::string>> dependency_graph;  // (x -> y)
  std::set<std::string> planted_critical;
  NoiseSpec noise;
  std::vector<double> click_times = {0.0};
  uint64_t seed = 1;
};

SimScenario load_scenario(std::istream& in);
SimScenario load_scenario_file(const std::string& path);

// Acyclicity, name resolution, planted-critical consistency against the
// noiseless oracle. Throws Error{InvalidConfig, UnknownDomain}.
void validate_scenario(const SimScenario& scenario);

// One run's event stream. Throttling stretches the shaped domain's data bursts
// to bytes * 8 / throttle_rate seconds; dependent flows shift accordingly.
// The PRNG stream is unique to (seed, run_index, throttled_domain).
std::vector<TraceEvent> generate_run(const SimScenario& scenario, int run_index,
                                     const std::optional<std::string>& throttled_domain,
                                     double throttle_rate);

// Click times expressed in the rebased clock of a generated run.
std::vector<double> rebased_clicks(const SimScenario& scenario,
                                   const std::vector<TraceEvent>& run_events);

// Baseline runs plus shaped runs for every domain, analyzed end to end.
ExperimentSet generate_experiment_set(const SimScenario& scenario, int runs_per_condition,
                                      const AnalysisConfig& cfg = {},
                                      double throttle_rate = 1000.0);

// Noiseless ground truth: TDT per throttled condition and per-domain completion
// times, computed by direct generation (no statistics involved).
struct GroundTruth {
  double baseline_tdt = 0.0;
  std::set<std::string> critical;                              // TDT shifts when throttled
  std::set<std::pair<std::string, std::string>> dependencies;  // T_y shifts when x throttled
};

GroundTruth ground_truth(const SimScenario& scenario, const AnalysisConfig& cfg = {},
                         double throttle_rate = 1000.0, double tolerance = 1e-6);

}  // namespace mcpa::sim
