#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mcpa/analysis.hpp"

namespace mcpa {

// Baseline runs plus per-domain throttled runs of one scripted scenario.
struct ExperimentSet {
  std::string scenario_id;
  std::vector<AnalyzedRun> baseline_runs;
  std::map<std::string, std::vector<AnalyzedRun>> shaped_runs;
  double throttle_rate = 1000.0;  // bits/s
  int runs_per_condition = 10;
  double significance = 0.05;
  int target_window = 0;  // windows matched by ordinal index across runs
};

struct PValueResult {
  bool is_significant = false;
  std::vector<double> per_run_p;
};

// One-sided z-test of each shaped value against the baseline mean/sd; the
// domain passes only if every per-run p is below `significance`. The baseline
// sd is floored at max(sd, 1% of mean, 1 ms). Throws Error{InsufficientBaseline}.
PValueResult run_pvalue_test(const std::vector<double>& baseline_values,
                             const std::vector<double>& shaped_values, double significance);

std::set<std::string> find_critical_set(const ExperimentSet& experiments);

// Edge (x -> y): throttling x significantly delays T_y in every run.
std::set<std::pair<std::string, std::string>> find_dependencies(const ExperimentSet& experiments);

enum class DomainClass { AdHoc, Cdn, OthServ };

const char* to_string(DomainClass c);

struct ClassifyConfig {
  std::set<std::string> app_domains;
  std::vector<std::string> cdn_keywords = {"cdn",        "cache", "edge",
                                           "akamai",     "cloudfront", "fbcdn",
                                           "ggpht"};
  std::vector<std::string> adservice_keywords = {"doubleclick", "googlesyndication",
                                                 "adservice", "ads."};
};

// AD_HOC on app-domain suffix match; else CDN on keyword substring; else OTH_SERV.
DomainClass classify_domain(const std::string& domain, const ClassifyConfig& cfg);

struct PhaseBreakdown {
  double dns = 0.0;
  double handshake = 0.0;
  double data = 0.0;
};

struct ClassShare {
  double time_share = 0.0;
  double byte_share = 0.0;

  bool operator==(const ClassShare&) const = default;
};

struct VolumeBreakdown {
  double critical_bytes = 0.0;
  double total_bytes = 0.0;
  double critical_flows_count = 0.0;
  double total_flows_count = 0.0;
};

struct CriticalReport {
  std::string scenario_id;
  std::set<std::string> critical_set;
  std::set<std::pair<std::string, std::string>> dependency_edges;
  std::vector<int> critical_flows;  // flow ids from the first baseline run
  double time_on_cp = 0.0;
  PhaseBreakdown time_on_cp_breakdown;
  VolumeBreakdown volume_breakdown;
  std::map<DomainClass, ClassShare> class_breakdown;
  std::map<std::string, std::vector<double>> per_domain_p;  // TDT test p-values
};

// Interval-union accounting over the baseline runs, averaged across runs.
CriticalReport assemble_report(const ExperimentSet& experiments,
                               const std::set<std::string>& critical_set,
                               const std::set<std::pair<std::string, std::string>>& edges,
                               const ClassifyConfig& classify = {});

// Full pipeline: critical set, dependencies, report.
CriticalReport run_cpa(const ExperimentSet& experiments, const ClassifyConfig& classify = {});

}  // namespace mcpa
