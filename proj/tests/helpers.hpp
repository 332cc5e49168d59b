#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mcpa/trace.hpp"

namespace test {

inline mcpa::FiveTuple tcp_tuple(const std::string& src_ip = "10.0.0.2", uint16_t src_port = 40000,
                                 const std::string& dst_ip = "10.1.1.1", uint16_t dst_port = 443) {
  return {src_ip, src_port, dst_ip, dst_port, mcpa::L4Proto::Tcp};
}

inline mcpa::TraceEvent data(double ts, uint64_t bytes,
                             const mcpa::FiveTuple& client_tuple = tcp_tuple(),
                             mcpa::Direction dir = mcpa::Direction::Down) {
  mcpa::TraceEvent ev;
  ev.ts = ts;
  ev.kind = mcpa::EventKind::Data;
  ev.tuple = dir == mcpa::Direction::Up ? client_tuple : client_tuple.reversed();
  ev.dir = dir;
  ev.payload_bytes = bytes;
  return ev;
}

inline mcpa::TraceEvent syn(double ts, const mcpa::FiveTuple& client_tuple = tcp_tuple()) {
  mcpa::TraceEvent ev;
  ev.ts = ts;
  ev.kind = mcpa::EventKind::FlowSyn;
  ev.tuple = client_tuple;
  ev.dir = mcpa::Direction::Up;
  return ev;
}

inline mcpa::TraceEvent fin(double ts, const mcpa::FiveTuple& client_tuple = tcp_tuple()) {
  mcpa::TraceEvent ev;
  ev.ts = ts;
  ev.kind = mcpa::EventKind::FlowFin;
  ev.tuple = client_tuple;
  ev.dir = mcpa::Direction::Up;
  return ev;
}

inline mcpa::TraceEvent sni(double ts, const std::string& name,
                            const mcpa::FiveTuple& client_tuple = tcp_tuple()) {
  mcpa::TraceEvent ev;
  ev.ts = ts;
  ev.kind = mcpa::EventKind::TlsSni;
  ev.tuple = client_tuple;
  ev.dir = mcpa::Direction::Up;
  ev.sni_name = name;
  return ev;
}

inline mcpa::TraceEvent dns_answer(double ts, const std::string& name,
                                   const std::vector<std::string>& ips) {
  mcpa::TraceEvent ev;
  ev.ts = ts;
  ev.kind = mcpa::EventKind::DnsAnswer;
  ev.tuple = {"10.0.0.53", 53, "10.0.0.2", 50000, mcpa::L4Proto::Udp};
  ev.dir = mcpa::Direction::Down;
  ev.dns_name = name;
  ev.resolved_ips = ips;
  return ev;
}

inline mcpa::TraceEvent dns_query(double ts, const std::string& name) {
  mcpa::TraceEvent ev;
  ev.ts = ts;
  ev.kind = mcpa::EventKind::DnsQuery;
  ev.tuple = {"10.0.0.2", 50000, "10.0.0.53", 53, mcpa::L4Proto::Udp};
  ev.dir = mcpa::Direction::Up;
  ev.dns_name = name;
  return ev;
}

// RAII temp file under the system temp dir.
struct TempFile {
  std::filesystem::path path;

  explicit TempFile(const std::string& contents, const std::string& suffix = ".jsonl") {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("mcpa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + suffix);
    std::ofstream out(path, std::ios::binary);
    out << contents;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

}  // namespace test
