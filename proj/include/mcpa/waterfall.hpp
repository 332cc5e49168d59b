#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcpa/ingest.hpp"
#include "mcpa/trace.hpp"
#include "mcpa/windows.hpp"

namespace mcpa {

struct Burst {
  int flow_id = -1;
  double start_ts = 0.0;
  double end_ts = 0.0;
  uint64_t bytes = 0;
};

// Greedy left-to-right grouping of a flow's DATA events; a gap strictly greater
// than 2 * rtt_estimate starts a new burst.
std::vector<Burst> split_bursts(const Flow& flow);

enum class PhaseKind { Dns, Handshake, DataBurst, Idle };

const char* to_string(PhaseKind k);

struct Phase {
  PhaseKind kind = PhaseKind::DataBurst;
  double start_ts = 0.0;
  double end_ts = 0.0;
  uint64_t bytes = 0;  // DataBurst only
};

struct WaterfallRow {
  int flow_id = -1;  // -1 for a detached DNS-only row
  std::string label;
  std::string domain;
  bool rtt_defaulted = false;
  std::vector<Phase> phases;  // non-overlapping, ordered; idle derived between them
};

struct Waterfall {
  int window_id = 0;
  double start_ts = 0.0;
  double end_ts = 0.0;
  std::vector<WaterfallRow> rows;                   // flow start order
  std::map<std::string, double> domain_completion;  // domain -> T_domain
};

Waterfall build_waterfall(const ActivityWindow& window, const std::vector<Flow>& flows,
                          const DomainTable& table);

enum class RenderFormat { Svg, Ascii };

// Deterministic rendering; critical rows are visually distinguished.
// ASCII: 100-column timeline, '=' data burst, '-' handshake, '.' idle, 'D' DNS,
// '#' critical data burst. SVG: one <g> per row.
std::string render_waterfall(const Waterfall& waterfall, RenderFormat format,
                             const std::set<std::string>* critical_domains = nullptr);

}  // namespace mcpa
