#include "mcpa/trace.hpp"

namespace mcpa {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Data: return "DATA";
    case EventKind::DnsQuery: return "DNS_QUERY";
    case EventKind::DnsAnswer: return "DNS_ANSWER";
    case EventKind::TlsSni: return "TLS_SNI";
    case EventKind::FlowSyn: return "FLOW_SYN";
    case EventKind::FlowFin: return "FLOW_FIN";
  }
  return "?";
}

const char* to_string(Direction d) { return d == Direction::Up ? "UP" : "DOWN"; }

const char* to_string(L4Proto p) { return p == L4Proto::Tcp ? "TCP" : "UDP"; }

const char* to_string(HandshakeKind k) {
  switch (k) {
    case HandshakeKind::None: return "NONE";
    case HandshakeKind::Tcp: return "TCP";
    case HandshakeKind::TcpTls: return "TCP+TLS";
    case HandshakeKind::Quic: return "QUIC";
  }
  return "?";
}

}  // namespace mcpa
