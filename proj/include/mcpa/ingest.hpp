#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcpa/trace.hpp"

namespace mcpa {

enum class TraceFormat { Jsonl, Pcap };

struct IngestConfig {
  double default_rtt = 0.050;  // fallback when no SYN/response gap is measurable
};

// ip -> DNS resolutions and 5-tuple -> SNI, built from the event stream.
class DomainTable {
 public:
  struct Resolution {
    double ts = 0.0;        // answer timestamp
    double query_ts = 0.0;  // matching query timestamp (== ts when unknown)
    std::string domain;
  };

  void add_answer(const TraceEvent& ev, double query_ts);
  void add_sni(const TraceEvent& ev);

  // Most recent resolution at or before `ts`; nullopt when the IP was never resolved.
  std::optional<Resolution> resolve(const std::string& ip, double ts) const;
  std::optional<std::string> sni_for(const FiveTuple& tuple) const;
  // Query/answer interval of the most recent resolution of `domain` at or before `ts`.
  std::optional<std::pair<double, double>> resolution_span(const std::string& domain,
                                                           double ts) const;

 private:
  std::map<std::string, std::vector<Resolution>> by_ip_;
  std::map<std::tuple<std::string, uint16_t, std::string, uint16_t, int>, std::string> sni_;
  std::map<std::string, std::vector<std::pair<double, double>>> spans_;  // domain -> (query, answer)
};

// Parse a trace into a sorted event stream, ts rebased so the first event is 0.
// Throws Error{MalformedInput, UnsupportedFormat}.
std::vector<TraceEvent> read_trace(std::istream& in, TraceFormat format);
std::vector<TraceEvent> read_trace_file(const std::string& path);  // format from extension

// Serialize events back to the JSONL schema (one object per line).
void write_jsonl(std::ostream& out, const std::vector<TraceEvent>& events);

// Group DATA events into flows keyed by 5-tuple, delimit handshakes, estimate
// RTTs and attribute a domain to every flow.
std::pair<std::vector<Flow>, DomainTable> assemble_flows(const std::vector<TraceEvent>& events,
                                                         const IngestConfig& cfg = {});

// SNI wins over DNS; DNS uses the most recent resolution at or before flow
// start; otherwise the destination IP literal.
std::string attribute_domain(const Flow& flow, const DomainTable& table);

}  // namespace mcpa
