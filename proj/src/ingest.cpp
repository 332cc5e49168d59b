#include "mcpa/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mcpa/error.hpp"
#include "mcpa/pcap.hpp"

namespace mcpa {

namespace {

using nlohmann::json;

std::pair<std::string, uint16_t> parse_endpoint(const std::string& s, size_t line) {
  auto pos = s.rfind(':');
  if (pos == std::string::npos || pos == 0 || pos + 1 >= s.size())
    throw Error(ErrorCode::MalformedInput,
                "line " + std::to_string(line) + ": bad endpoint '" + s + "'");
  int port = 0;
  try {
    port = std::stoi(s.substr(pos + 1));
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535)
    throw Error(ErrorCode::MalformedInput,
                "line " + std::to_string(line) + ": bad port in '" + s + "'");
  return {s.substr(0, pos), static_cast<uint16_t>(port)};
}

EventKind parse_kind(const std::string& k, size_t line) {
  if (k == "DATA") return EventKind::Data;
  if (k == "DNS_QUERY") return EventKind::DnsQuery;
  if (k == "DNS_ANSWER") return EventKind::DnsAnswer;
  if (k == "TLS_SNI") return EventKind::TlsSni;
  if (k == "FLOW_SYN") return EventKind::FlowSyn;
  if (k == "FLOW_FIN") return EventKind::FlowFin;
  throw Error(ErrorCode::MalformedInput,
              "line " + std::to_string(line) + ": unknown kind '" + k + "'");
}

const json& require(const json& obj, const char* field, size_t line) {
  auto it = obj.find(field);
  if (it == obj.end())
    throw Error(ErrorCode::MalformedInput,
                "line " + std::to_string(line) + ": missing field '" + field + "'");
  return *it;
}

TraceEvent parse_event(const json& obj, size_t line) {
  TraceEvent ev;
  ev.ts = require(obj, "ts", line).get<double>();
  if (ev.ts < 0)
    throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line) + ": negative ts");
  ev.kind = parse_kind(require(obj, "kind", line).get<std::string>(), line);

  auto src = parse_endpoint(require(obj, "src", line).get<std::string>(), line);
  auto dst = parse_endpoint(require(obj, "dst", line).get<std::string>(), line);
  ev.tuple = {src.first, src.second, dst.first, dst.second, L4Proto::Tcp};
  std::string proto = require(obj, "proto", line).get<std::string>();
  if (proto == "TCP")
    ev.tuple.proto = L4Proto::Tcp;
  else if (proto == "UDP")
    ev.tuple.proto = L4Proto::Udp;
  else
    throw Error(ErrorCode::MalformedInput,
                "line " + std::to_string(line) + ": unknown proto '" + proto + "'");
  std::string dir = require(obj, "dir", line).get<std::string>();
  if (dir == "UP")
    ev.dir = Direction::Up;
  else if (dir == "DOWN")
    ev.dir = Direction::Down;
  else
    throw Error(ErrorCode::MalformedInput,
                "line " + std::to_string(line) + ": unknown dir '" + dir + "'");

  if (ev.kind == EventKind::Data) {
    auto b = require(obj, "bytes", line).get<int64_t>();
    if (b < 0)
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line) + ": negative bytes");
    ev.payload_bytes = static_cast<uint64_t>(b);
  }
  if (ev.kind == EventKind::DnsQuery || ev.kind == EventKind::DnsAnswer)
    ev.dns_name = require(obj, "name", line).get<std::string>();
  if (ev.kind == EventKind::DnsAnswer) {
    auto ips = require(obj, "ips", line);
    if (!ips.is_array() || ips.empty())
      throw Error(ErrorCode::MalformedInput,
                  "line " + std::to_string(line) + ": DNS_ANSWER needs >=1 resolved IP");
    for (const auto& ip : ips) ev.resolved_ips.push_back(ip.get<std::string>());
    if (obj.contains("cnames"))
      for (const auto& c : obj["cnames"]) ev.dns_cnames.push_back(c.get<std::string>());
  }
  if (ev.kind == EventKind::TlsSni) ev.sni_name = require(obj, "name", line).get<std::string>();
  return ev;
}

std::vector<TraceEvent> read_jsonl(std::istream& in) {
  std::vector<TraceEvent> events;
  std::string line;
  size_t lineno = 0;
  double prev_ts = -1.0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::MalformedInput,
                  "line " + std::to_string(lineno) + ": " + e.what());
    }
    TraceEvent ev;
    try {
      ev = parse_event(obj, lineno);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedInput,
                  "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (ev.ts < prev_ts)
      throw Error(ErrorCode::MalformedInput,
                  "line " + std::to_string(lineno) + ": events out of order (ts " +
                      std::to_string(ev.ts) + " after " + std::to_string(prev_ts) + ")");
    prev_ts = ev.ts;
    events.push_back(std::move(ev));
  }
  return events;
}

void rebase(std::vector<TraceEvent>& events) {
  if (events.empty()) return;
  double t0 = events.front().ts;
  if (t0 == 0.0) return;
  for (auto& ev : events) ev.ts -= t0;
}

}  // namespace

std::vector<TraceEvent> read_trace(std::istream& in, TraceFormat format) {
  std::vector<TraceEvent> events;
  switch (format) {
    case TraceFormat::Jsonl:
      events = read_jsonl(in);
      break;
    case TraceFormat::Pcap:
      events = read_pcap(in);
      std::stable_sort(events.begin(), events.end(),
                       [](const TraceEvent& a, const TraceEvent& b) { return a.ts < b.ts; });
      break;
    default:
      throw Error(ErrorCode::UnsupportedFormat, "unknown trace format");
  }
  rebase(events);
  return events;
}

std::vector<TraceEvent> read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open " + path);
  bool pcap = path.size() > 5 && (path.ends_with(".pcap") || path.ends_with(".cap"));
  return read_trace(in, pcap ? TraceFormat::Pcap : TraceFormat::Jsonl);
}

void write_jsonl(std::ostream& out, const std::vector<TraceEvent>& events) {
  for (const auto& ev : events) {
    json obj;
    obj["ts"] = ev.ts;
    obj["kind"] = to_string(ev.kind);
    obj["src"] = ev.tuple.src_ip + ":" + std::to_string(ev.tuple.src_port);
    obj["dst"] = ev.tuple.dst_ip + ":" + std::to_string(ev.tuple.dst_port);
    obj["proto"] = to_string(ev.tuple.proto);
    obj["dir"] = to_string(ev.dir);
    if (ev.kind == EventKind::Data) obj["bytes"] = ev.payload_bytes;
    if (!ev.dns_name.empty()) obj["name"] = ev.dns_name;
    if (!ev.sni_name.empty()) obj["name"] = ev.sni_name;
    if (!ev.dns_cnames.empty()) obj["cnames"] = ev.dns_cnames;
    if (!ev.resolved_ips.empty()) obj["ips"] = ev.resolved_ips;
    out << obj.dump() << "\n";
  }
}

void DomainTable::add_answer(const TraceEvent& ev, double query_ts) {
  Resolution r{ev.ts, query_ts, ev.dns_name};
  for (const auto& ip : ev.resolved_ips) by_ip_[ip].push_back(r);
  spans_[ev.dns_name].emplace_back(query_ts, ev.ts);
}

void DomainTable::add_sni(const TraceEvent& ev) {
  // First SNI on a connection wins; a 5-tuple carries one TLS session name.
  sni_.emplace(ev.tuple.canonical(), ev.sni_name);
}

std::optional<DomainTable::Resolution> DomainTable::resolve(const std::string& ip,
                                                            double ts) const {
  auto it = by_ip_.find(ip);
  if (it == by_ip_.end()) return std::nullopt;
  const Resolution* best = nullptr;
  for (const auto& r : it->second)
    if (r.ts <= ts && (!best || r.ts >= best->ts)) best = &r;
  if (!best) return std::nullopt;
  return *best;
}

std::optional<std::string> DomainTable::sni_for(const FiveTuple& tuple) const {
  auto it = sni_.find(tuple.canonical());
  if (it == sni_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::pair<double, double>> DomainTable::resolution_span(const std::string& domain,
                                                                      double ts) const {
  auto it = spans_.find(domain);
  if (it == spans_.end()) return std::nullopt;
  const std::pair<double, double>* best = nullptr;
  for (const auto& s : it->second)
    if (s.second <= ts && (!best || s.second >= best->second)) best = &s;
  if (!best) return std::nullopt;
  return *best;
}

std::string attribute_domain(const Flow& flow, const DomainTable& table) {
  if (auto sni = table.sni_for(flow.tuple)) return *sni;
  if (auto dns = table.resolve(flow.tuple.dst_ip, flow.start_ts)) return dns->domain;
  return flow.tuple.dst_ip;
}

namespace {

struct FlowBuilder {
  Flow flow;
  bool oriented = false;
  bool syn_seen = false;
  double syn_ts = 0.0;
  bool sni_seen = false;
  double sni_ts = 0.0;
  bool fin = false;
  bool up_seen = false;
  bool down_seen = false;
  double first_response_ts = -1.0;  // first DOWN event after the flow opened

  void orient(const TraceEvent& ev) {
    if (oriented) return;
    flow.tuple = ev.dir == Direction::Up ? ev.tuple : ev.tuple.reversed();
    flow.start_ts = ev.ts;
    oriented = true;
  }

  void observe(const TraceEvent& ev) {
    orient(ev);
    flow.end_ts = std::max(flow.end_ts, ev.ts);
    if (ev.dir == Direction::Up) up_seen = true;
    if (ev.dir == Direction::Down) {
      down_seen = true;
      if (first_response_ts < 0) first_response_ts = ev.ts;
    }
  }
};

bool is_quic(const FiveTuple& t) {
  return t.proto == L4Proto::Udp && (t.src_port == 443 || t.dst_port == 443);
}

Flow finalize(FlowBuilder& b, const IngestConfig& cfg, const DomainTable& table, int id) {
  Flow& f = b.flow;
  f.flow_id = id;
  f.end_ts = std::max(f.end_ts, f.start_ts);
  f.synthetic = !b.syn_seen && !is_quic(f.tuple);

  double first_data = f.data_events.empty() ? -1.0 : f.data_events.front().ts;
  if (is_quic(f.tuple)) {
    f.handshake.kind = HandshakeKind::Quic;
    f.handshake.start_ts = f.start_ts;
    // First datagram after the initial bidirectional exchange.
    double end = f.end_ts;
    if (b.up_seen && b.down_seen && b.first_response_ts >= 0) {
      end = b.first_response_ts;
      for (const auto& ev : f.data_events)
        if (ev.ts > b.first_response_ts) {
          end = ev.ts;
          break;
        }
    }
    f.handshake.end_ts = std::min(end, f.end_ts);
  } else if (b.syn_seen) {
    f.handshake.kind = b.sni_seen ? HandshakeKind::TcpTls : HandshakeKind::Tcp;
    f.handshake.start_ts = b.syn_ts;
    double gate = b.sni_seen ? b.sni_ts : b.syn_ts;
    double end = f.end_ts;
    for (const auto& ev : f.data_events)
      if (ev.ts >= gate) {
        end = ev.ts;
        break;
      }
    if (f.data_events.empty()) end = f.end_ts;
    f.handshake.end_ts = std::max(end, f.handshake.start_ts);
  } else {
    f.handshake.kind = HandshakeKind::None;
    f.handshake.start_ts = f.handshake.end_ts = f.start_ts;
  }
  (void)first_data;

  double gap = -1.0;
  if (b.syn_seen && b.first_response_ts >= b.syn_ts) gap = b.first_response_ts - b.syn_ts;
  if (gap > 0) {
    f.rtt_estimate = gap;
    f.rtt_measured = true;
  } else {
    f.rtt_estimate = cfg.default_rtt;
    f.rtt_measured = false;
  }

  f.domain = attribute_domain(f, table);
  return f;
}

}  // namespace

std::pair<std::vector<Flow>, DomainTable> assemble_flows(const std::vector<TraceEvent>& events,
                                                         const IngestConfig& cfg) {
  DomainTable table;
  std::map<std::string, double> pending_queries;  // dns name -> last query ts
  using Key = std::tuple<std::string, uint16_t, std::string, uint16_t, int>;
  std::map<Key, FlowBuilder> active;
  std::vector<FlowBuilder> closed;

  auto retire = [&](FlowBuilder&& b) { closed.push_back(std::move(b)); };

  for (const auto& ev : events) {
    switch (ev.kind) {
      case EventKind::DnsQuery:
        pending_queries[ev.dns_name] = ev.ts;
        continue;
      case EventKind::DnsAnswer: {
        auto it = pending_queries.find(ev.dns_name);
        table.add_answer(ev, it != pending_queries.end() ? it->second : ev.ts);
        continue;
      }
      default:
        break;
    }

    Key key = ev.tuple.canonical();
    auto it = active.find(key);
    if (it != active.end() && it->second.fin) {
      // A FIN closed this 5-tuple; later traffic opens a fresh flow.
      retire(std::move(it->second));
      active.erase(it);
      it = active.end();
    }
    if (it == active.end()) it = active.emplace(key, FlowBuilder{}).first;
    FlowBuilder& b = it->second;

    switch (ev.kind) {
      case EventKind::FlowSyn:
        b.observe(ev);
        if (!b.syn_seen) {
          b.syn_seen = true;
          b.syn_ts = ev.ts;
        }
        break;
      case EventKind::FlowFin:
        b.observe(ev);
        b.fin = true;
        break;
      case EventKind::TlsSni:
        b.observe(ev);
        if (!b.sni_seen) {
          b.sni_seen = true;
          b.sni_ts = ev.ts;
        }
        table.add_sni(ev);
        break;
      case EventKind::Data: {
        b.observe(ev);
        TraceEvent data = ev;
        if (ev.dir == Direction::Up)
          b.flow.bytes_up += ev.payload_bytes;
        else
          b.flow.bytes_down += ev.payload_bytes;
        b.flow.data_events.push_back(std::move(data));
        break;
      }
      default:
        break;
    }
  }

  for (auto& [key, b] : active) retire(std::move(b));

  std::sort(closed.begin(), closed.end(), [](const FlowBuilder& a, const FlowBuilder& c) {
    return a.flow.start_ts < c.flow.start_ts;
  });
  std::vector<Flow> flows;
  flows.reserve(closed.size());
  int id = 0;
  for (auto& b : closed) flows.push_back(finalize(b, cfg, table, id++));
  return {std::move(flows), std::move(table)};
}

}  // namespace mcpa
