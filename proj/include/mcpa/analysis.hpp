#pragma once

#include <vector>

#include "mcpa/ingest.hpp"
#include "mcpa/metrics.hpp"
#include "mcpa/waterfall.hpp"
#include "mcpa/windows.hpp"

namespace mcpa {

struct AnalysisConfig {
  IngestConfig ingest;
  PartitionConfig partition;
  double percentile = 0.95;
  bool background_filter = false;  // off by default: scripted runs are foreground
};

struct AnalyzedWindow {
  ActivityWindow window;
  Waterfall waterfall;
  DeliveryMetrics metrics;
  bool has_data = false;
};

// One fully processed trace: flows, attribution, windows, waterfalls, metrics.
struct AnalyzedRun {
  std::vector<Flow> flows;
  DomainTable table;
  std::vector<AnalyzedWindow> windows;
};

AnalyzedRun analyze_events(const std::vector<TraceEvent>& events, const AnalysisConfig& cfg);
AnalyzedRun analyze_trace_file(const std::string& path, const AnalysisConfig& cfg);

}  // namespace mcpa
