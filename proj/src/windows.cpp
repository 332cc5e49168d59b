#include "mcpa/windows.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>

#include "mcpa/error.hpp"

namespace mcpa {

namespace {

constexpr double kWindowEndEpsilon = 1e-6;

struct DataPoint {
  double ts;
  uint64_t bytes;
};

std::vector<DataPoint> data_points(const std::vector<TraceEvent>& events) {
  std::vector<DataPoint> pts;
  for (const auto& ev : events)
    if (ev.kind == EventKind::Data) pts.push_back({ev.ts, ev.payload_bytes});
  return pts;
}

// Maximal runs of DATA events with inter-event gaps < alpha_t.
std::vector<std::pair<size_t, size_t>> idle_bursts(const std::vector<DataPoint>& pts,
                                                   double alpha_t) {
  std::vector<std::pair<size_t, size_t>> bursts;  // [first, last] index ranges
  for (size_t i = 0; i < pts.size(); ++i) {
    if (bursts.empty() || pts[i].ts - pts[i - 1].ts >= alpha_t)
      bursts.emplace_back(i, i);
    else
      bursts.back().second = i;
  }
  return bursts;
}

std::vector<ActivityWindow> windows_from_starts(const std::vector<DataPoint>& pts,
                                                const std::vector<size_t>& start_indices) {
  std::vector<ActivityWindow> windows;
  for (size_t w = 0; w < start_indices.size(); ++w) {
    ActivityWindow win;
    win.window_id = static_cast<int>(w);
    win.start_ts = pts[start_indices[w]].ts;
    win.end_ts = (w + 1 < start_indices.size()) ? pts[start_indices[w + 1]].ts
                                                : pts.back().ts + kWindowEndEpsilon;
    for (const auto& p : pts)
      if (p.ts >= win.start_ts && p.ts < win.end_ts) win.total_bytes += p.bytes;
    windows.push_back(std::move(win));
  }
  return windows;
}

}  // namespace

ClickLog read_click_log(std::istream& in) {
  ClickLog log;
  std::string line;
  bool header = true;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (header && line.find("ts_seconds") != std::string::npos) {
      header = false;
      continue;
    }
    header = false;
    try {
      double ts = std::stod(line);
      if (!log.clicks.empty() && ts <= log.clicks.back())
        throw Error(ErrorCode::MalformedInput,
                    "click log line " + std::to_string(lineno) + ": not strictly increasing");
      log.clicks.push_back(ts);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedInput,
                  "click log line " + std::to_string(lineno) + ": not a number");
    }
  }
  return log;
}

double StepFunction::at(double t) const {
  double v = 0.0;
  for (const auto& [ts, val] : points) {
    if (ts > t) break;
    v = val;
  }
  return v;
}

double StepFunction::max_value() const {
  double m = 0.0;
  for (const auto& [ts, val] : points) m = std::max(m, val);
  return m;
}

std::vector<ActivityWindow> partition_naive(const std::vector<TraceEvent>& events,
                                            const PartitionConfig& config) {
  auto th = config.effective();
  if (th.alpha_t <= 0) throw Error(ErrorCode::InvalidConfig, "alpha_t must be > 0");
  auto pts = data_points(events);
  if (pts.empty()) return {};
  std::vector<size_t> starts;
  for (const auto& [first, last] : idle_bursts(pts, th.alpha_t)) starts.push_back(first);
  return windows_from_starts(pts, starts);
}

StepFunction traffic_gradient(const std::vector<TraceEvent>& events, double alpha_t) {
  if (alpha_t <= 0) throw Error(ErrorCode::InvalidConfig, "alpha_t must be > 0");
  // +bytes when an event enters the trailing window, -bytes when it expires.
  std::map<double, double> deltas;
  for (const auto& ev : events) {
    if (ev.kind != EventKind::Data || ev.payload_bytes == 0) continue;
    deltas[ev.ts] += static_cast<double>(ev.payload_bytes);
    deltas[ev.ts + alpha_t] -= static_cast<double>(ev.payload_bytes);
  }
  StepFunction fn;
  double acc = 0.0;
  for (const auto& [t, d] : deltas) {
    acc += d;
    fn.points.emplace_back(t, std::abs(acc) < 1e-9 ? 0.0 : acc);
  }
  return fn;
}

std::vector<ActivityWindow> partition_gradient(const std::vector<TraceEvent>& events,
                                               const PartitionConfig& config) {
  auto th = config.effective();
  if (th.alpha_t <= 0 || th.alpha_b <= 0)
    throw Error(ErrorCode::InvalidConfig, "alpha_t and alpha_b must be > 0");
  auto pts = data_points(events);
  if (pts.empty()) return {};

  std::vector<size_t> starts;
  for (const auto& [first, last] : idle_bursts(pts, th.alpha_t)) {
    // Trailing-window volume within the burst; its maximum sits at event times.
    double max_grad = 0.0;
    size_t lo = first;
    double sum = 0.0;
    for (size_t i = first; i <= last; ++i) {
      sum += static_cast<double>(pts[i].bytes);
      while (pts[lo].ts <= pts[i].ts - th.alpha_t) sum -= static_cast<double>(pts[lo++].bytes);
      max_grad = std::max(max_grad, sum);
    }
    if (max_grad >= th.alpha_b) starts.push_back(first);
  }
  return windows_from_starts(pts, starts);
}

std::vector<ActivityWindow> partition(const std::vector<TraceEvent>& events,
                                      const PartitionConfig& config) {
  return config.policy == PartitionPolicy::Naive ? partition_naive(events, config)
                                                 : partition_gradient(events, config);
}

PartitionScore evaluate_partitioning(const std::vector<ActivityWindow>& windows,
                                     const ClickLog& clicks, double match_tolerance) {
  if (match_tolerance <= 0) throw Error(ErrorCode::InvalidConfig, "tolerance must be > 0");
  std::vector<bool> click_used(clicks.clicks.size(), false);
  size_t matched = 0;
  for (const auto& win : windows) {
    for (size_t c = 0; c < clicks.clicks.size(); ++c) {
      if (click_used[c]) continue;
      if (std::abs(win.start_ts - clicks.clicks[c]) <= match_tolerance) {
        click_used[c] = true;
        ++matched;
        break;
      }
    }
  }
  PartitionScore score;
  score.precision = windows.empty() ? 1.0 : double(matched) / double(windows.size());
  score.recall = clicks.clicks.empty() ? 1.0 : double(matched) / double(clicks.clicks.size());
  return score;
}

std::vector<ActivityWindow> filter_background(const std::vector<ActivityWindow>& windows,
                                              const PartitionConfig& config) {
  if (config.min_window_rate <= 0) return windows;
  constexpr double kSpan = 60.0;
  std::vector<ActivityWindow> kept;
  for (size_t i = 0; i < windows.size(); ++i) {
    // Keep the window when some 60 s span containing it holds enough starts.
    bool ok = false;
    for (size_t j = 0; j <= i && !ok; ++j) {
      if (windows[i].start_ts - windows[j].start_ts > kSpan) continue;
      size_t k = i;
      while (k + 1 < windows.size() && windows[k + 1].start_ts - windows[j].start_ts <= kSpan) ++k;
      if (double(k - j + 1) >= config.min_window_rate) ok = true;
    }
    if (ok) kept.push_back(windows[i]);
  }
  return kept;
}

void attach_flows(std::vector<ActivityWindow>& windows, const std::vector<Flow>& flows) {
  for (auto& win : windows) win.flows.clear();
  for (const auto& flow : flows) {
    if (flow.data_events.empty()) continue;
    double first = flow.data_events.front().ts;
    for (auto& win : windows)
      if (win.contains(first)) {
        win.flows.push_back(flow.flow_id);
        break;
      }
  }
}

}  // namespace mcpa
