#pragma once

#include <iosfwd>
#include <vector>

#include "mcpa/trace.hpp"

namespace mcpa {

// Adapter from classic pcap captures (Ethernet or raw-IPv4 link layer) to the
// normalized event schema: DATA per packet with payload, FLOW_SYN/FLOW_FIN
// from TCP flags, DNS_QUERY/DNS_ANSWER from UDP/53, TLS_SNI from ClientHello.
// Throws Error{MalformedInput, UnsupportedFormat}.
std::vector<TraceEvent> read_pcap(std::istream& in);

}  // namespace mcpa
