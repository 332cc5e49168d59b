#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace mcpa {

enum class EventKind { Data, DnsQuery, DnsAnswer, TlsSni, FlowSyn, FlowFin };
enum class Direction { Up, Down };
enum class L4Proto { Tcp, Udp };

const char* to_string(EventKind k);
const char* to_string(Direction d);
const char* to_string(L4Proto p);

struct FiveTuple {
  std::string src_ip;
  uint16_t src_port = 0;
  std::string dst_ip;
  uint16_t dst_port = 0;
  L4Proto proto = L4Proto::Tcp;

  // Direction-insensitive flow key: the lexicographically smaller endpoint first.
  std::tuple<std::string, uint16_t, std::string, uint16_t, int> canonical() const {
    auto a = std::make_tuple(src_ip, src_port);
    auto b = std::make_tuple(dst_ip, dst_port);
    if (b < a) std::swap(a, b);
    return {std::get<0>(a), std::get<1>(a), std::get<0>(b), std::get<1>(b),
            static_cast<int>(proto)};
  }

  FiveTuple reversed() const { return {dst_ip, dst_port, src_ip, src_port, proto}; }

  bool operator==(const FiveTuple& o) const {
    return src_ip == o.src_ip && src_port == o.src_port && dst_ip == o.dst_ip &&
           dst_port == o.dst_port && proto == o.proto;
  }
};

// One timestamped network observation in a normalized stream. ts is seconds
// since trace start, microsecond precision.
struct TraceEvent {
  double ts = 0.0;
  EventKind kind = EventKind::Data;
  FiveTuple tuple;
  Direction dir = Direction::Up;
  uint64_t payload_bytes = 0;  // DATA only

  // DNS_QUERY / DNS_ANSWER
  std::string dns_name;
  std::vector<std::string> dns_cnames;
  std::vector<std::string> resolved_ips;

  // TLS_SNI
  std::string sni_name;
};

enum class HandshakeKind { None, Tcp, TcpTls, Quic };

const char* to_string(HandshakeKind k);

struct Handshake {
  HandshakeKind kind = HandshakeKind::None;
  double start_ts = 0.0;
  double end_ts = 0.0;
  bool tls_resumed = false;
};

struct Flow {
  int flow_id = -1;
  FiveTuple tuple;  // oriented: src = client (UP sender)
  double start_ts = 0.0;
  double end_ts = 0.0;
  uint64_t bytes_up = 0;
  uint64_t bytes_down = 0;
  double rtt_estimate = 0.0;
  bool rtt_measured = false;
  Handshake handshake;
  std::string domain;
  std::vector<TraceEvent> data_events;  // ordered DATA events
  bool synthetic = false;               // orphan events attached without SYN

  double first_data_ts() const { return data_events.empty() ? start_ts : data_events.front().ts; }
  double last_data_ts() const { return data_events.empty() ? start_ts : data_events.back().ts; }
};

}  // namespace mcpa
