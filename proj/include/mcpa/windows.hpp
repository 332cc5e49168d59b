#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mcpa/trace.hpp"

namespace mcpa {

enum class PartitionPolicy { Naive, Gradient };

struct Thresholds {
  double alpha_t = 1.0;     // seconds, idle / sliding-window length
  double alpha_b = 5000.0;  // bytes, gradient burst threshold
};

struct PartitionConfig {
  PartitionPolicy policy = PartitionPolicy::Gradient;
  double alpha_t = 1.0;
  double alpha_b = 5000.0;
  std::map<std::string, Thresholds> category_overrides;  // app category -> thresholds
  double min_window_rate = 2.0;                          // windows per minute
  std::string category;                                  // selects an override when set

  Thresholds effective() const {
    if (!category.empty()) {
      auto it = category_overrides.find(category);
      if (it != category_overrides.end()) return it->second;
    }
    return {alpha_t, alpha_b};
  }
};

// Half-open [start_ts, end_ts) interval of traffic attributed to one user interaction.
struct ActivityWindow {
  int window_id = 0;
  double start_ts = 0.0;
  double end_ts = 0.0;
  std::vector<int> flows;  // flow_ids whose first DATA event falls in the interval
  uint64_t total_bytes = 0;

  bool contains(double ts) const { return ts >= start_ts && ts < end_ts; }
};

struct ClickLog {
  std::vector<double> clicks;  // strictly increasing
};

ClickLog read_click_log(std::istream& in);

// Piecewise-constant sliding-window volume: value holds on [t_i, t_{i+1}).
struct StepFunction {
  std::vector<std::pair<double, double>> points;  // (t, value), sorted by t

  double at(double t) const;
  double max_value() const;
};

std::vector<ActivityWindow> partition_naive(const std::vector<TraceEvent>& events,
                                            const PartitionConfig& config);

// nabla_b(t) = sum of DATA bytes with ts in (t - alpha_t, t].
StepFunction traffic_gradient(const std::vector<TraceEvent>& events, double alpha_t);

std::vector<ActivityWindow> partition_gradient(const std::vector<TraceEvent>& events,
                                               const PartitionConfig& config);

std::vector<ActivityWindow> partition(const std::vector<TraceEvent>& events,
                                      const PartitionConfig& config);

struct PartitionScore {
  double precision = 1.0;
  double recall = 1.0;
};

// A window matches a click when |window.start - click| <= tolerance; greedy in
// time order, one click per window. Precision/recall are 1 on empty denominators.
PartitionScore evaluate_partitioning(const std::vector<ActivityWindow>& windows,
                                     const ClickLog& clicks, double match_tolerance);

// Drop windows outside every 60 s span holding >= min_window_rate window starts.
std::vector<ActivityWindow> filter_background(const std::vector<ActivityWindow>& windows,
                                              const PartitionConfig& config);

// Fill ActivityWindow::flows from assembled flows (first DATA event in window).
void attach_flows(std::vector<ActivityWindow>& windows, const std::vector<Flow>& flows);

}  // namespace mcpa
