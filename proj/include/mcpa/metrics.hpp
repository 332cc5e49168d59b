#pragma once

#include <cstdint>
#include <vector>

#include "mcpa/trace.hpp"
#include "mcpa/windows.hpp"

namespace mcpa {

// Cumulative bytes over time within one window; ts relative to window start.
// x_B(t) = cum_bytes(t) / total_bytes, right-continuous.
struct ByteEvolution {
  int window_id = 0;
  std::vector<std::pair<double, uint64_t>> samples;  // (ts, cum_bytes), non-decreasing
  uint64_t total_bytes = 0;
};

struct DeliveryMetrics {
  double tdt = 0.0;
  double tdi = 0.0;
  double percentile = 0.95;
  uint64_t total_bytes = 0;
};

// Throws Error{EmptyWindow} when the window holds no DATA events.
ByteEvolution byte_evolution(const ActivityWindow& window, const std::vector<Flow>& flows);

// Smallest sample ts with cum_bytes >= percentile * total_bytes.
double compute_tdt(const ByteEvolution& evolution, double percentile);

// Exact integral of the step function 1 - x_B(t) over [0, tdt].
double compute_tdi(const ByteEvolution& evolution, double tdt);

DeliveryMetrics compute_metrics(const ByteEvolution& evolution, double percentile = 0.95);

std::vector<std::pair<double, double>> percentile_sweep(const ByteEvolution& evolution,
                                                        const std::vector<double>& percentiles);

}  // namespace mcpa
