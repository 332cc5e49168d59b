#include "mcpa/metrics.hpp"

#include <algorithm>

#include "mcpa/error.hpp"

namespace mcpa {

ByteEvolution byte_evolution(const ActivityWindow& window, const std::vector<Flow>& flows) {
  std::vector<std::pair<double, uint64_t>> raw;  // (ts, bytes) inside the window
  for (const auto& flow : flows)
    for (const auto& ev : flow.data_events)
      if (window.contains(ev.ts)) raw.emplace_back(ev.ts, ev.payload_bytes);
  if (raw.empty()) throw Error(ErrorCode::EmptyWindow, "window has no DATA events");
  std::sort(raw.begin(), raw.end());

  ByteEvolution evo;
  evo.window_id = window.window_id;
  uint64_t cum = 0;
  for (const auto& [ts, bytes] : raw) {
    cum += bytes;
    double rel = ts - window.start_ts;
    if (!evo.samples.empty() && evo.samples.back().first == rel)
      evo.samples.back().second = cum;
    else
      evo.samples.emplace_back(rel, cum);
  }
  evo.total_bytes = cum;
  return evo;
}

double compute_tdt(const ByteEvolution& evolution, double percentile) {
  if (percentile <= 0.0 || percentile > 1.0)
    throw Error(ErrorCode::InvalidConfig, "percentile must be in (0, 1]");
  if (evolution.total_bytes == 0 || evolution.samples.empty())
    throw Error(ErrorCode::EmptyWindow, "evolution has no bytes");
  double target = percentile * static_cast<double>(evolution.total_bytes);
  for (const auto& [ts, cum] : evolution.samples)
    if (static_cast<double>(cum) >= target) return ts;
  return evolution.samples.back().first;
}

double compute_tdi(const ByteEvolution& evolution, double tdt) {
  if (evolution.total_bytes == 0) return 0.0;
  // x_B is a right-continuous step: value samples[i].cum on [ts_i, ts_{i+1}), 0 before.
  double total = static_cast<double>(evolution.total_bytes);
  double tdi = 0.0;
  double prev_ts = 0.0;
  double prev_x = 0.0;
  for (const auto& [ts, cum] : evolution.samples) {
    if (ts >= tdt) break;
    double seg_start = std::max(prev_ts, 0.0);
    if (ts > seg_start) tdi += (1.0 - prev_x) * (ts - seg_start);
    prev_ts = ts;
    prev_x = static_cast<double>(cum) / total;
  }
  if (tdt > prev_ts) tdi += (1.0 - prev_x) * (tdt - prev_ts);
  return tdi;
}

DeliveryMetrics compute_metrics(const ByteEvolution& evolution, double percentile) {
  DeliveryMetrics m;
  m.percentile = percentile;
  m.total_bytes = evolution.total_bytes;
  m.tdt = compute_tdt(evolution, percentile);
  m.tdi = compute_tdi(evolution, m.tdt);
  return m;
}

std::vector<std::pair<double, double>> percentile_sweep(const ByteEvolution& evolution,
                                                        const std::vector<double>& percentiles) {
  std::vector<std::pair<double, double>> out;
  out.reserve(percentiles.size());
  for (double p : percentiles) out.emplace_back(p, compute_tdt(evolution, p));
  return out;
}

}  // namespace mcpa
