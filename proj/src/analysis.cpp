#include "mcpa/analysis.hpp"

#include "mcpa/error.hpp"

namespace mcpa {

AnalyzedRun analyze_events(const std::vector<TraceEvent>& events, const AnalysisConfig& cfg) {
  AnalyzedRun run;
  auto [flows, table] = assemble_flows(events, cfg.ingest);
  run.flows = std::move(flows);
  run.table = std::move(table);

  auto windows = partition(events, cfg.partition);
  if (cfg.background_filter) windows = filter_background(windows, cfg.partition);
  attach_flows(windows, run.flows);

  for (auto& window : windows) {
    AnalyzedWindow aw;
    aw.window = window;
    aw.waterfall = build_waterfall(window, run.flows, run.table);
    try {
      aw.metrics = compute_metrics(byte_evolution(window, run.flows), cfg.percentile);
      aw.has_data = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyWindow) throw;
    }
    run.windows.push_back(std::move(aw));
  }
  return run;
}

AnalyzedRun analyze_trace_file(const std::string& path, const AnalysisConfig& cfg) {
  return analyze_events(read_trace_file(path), cfg);
}

}  // namespace mcpa
