#include "mcpa/pcap.hpp"

#include <cstring>
#include <istream>
#include <map>
#include <string>

#include "mcpa/error.hpp"

namespace mcpa {

namespace {

constexpr uint32_t kMagicUsec = 0xa1b2c3d4;
constexpr uint32_t kMagicUsecSwap = 0xd4c3b2a1;
constexpr uint32_t kMagicNsec = 0xa1b23c4d;
constexpr uint32_t kMagicNsecSwap = 0x4d3cb2a1;

constexpr uint16_t kEthIpv4 = 0x0800;
constexpr int kLinkEthernet = 1;
constexpr int kLinkRawIp = 101;

constexpr uint8_t kTcpFin = 0x01;
constexpr uint8_t kTcpSyn = 0x02;
constexpr uint8_t kTcpRst = 0x04;
constexpr uint8_t kTcpAck = 0x10;

struct Reader {
  const uint8_t* p;
  size_t n;

  bool take(size_t k) {
    if (n < k) return false;
    p += k;
    n -= k;
    return true;
  }
  uint8_t u8(size_t off) const { return p[off]; }
  uint16_t be16(size_t off) const { return uint16_t(p[off]) << 8 | p[off + 1]; }
  uint32_t be32(size_t off) const {
    return uint32_t(p[off]) << 24 | uint32_t(p[off + 1]) << 16 | uint32_t(p[off + 2]) << 8 |
           p[off + 3];
  }
};

uint32_t swap32(uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}
uint16_t swap16(uint16_t v) { return uint16_t((v >> 8) | (v << 8)); }

std::string ipv4_str(uint32_t addr) {
  return std::to_string(addr >> 24) + "." + std::to_string((addr >> 16) & 0xff) + "." +
         std::to_string((addr >> 8) & 0xff) + "." + std::to_string(addr & 0xff);
}

// DNS name with compression pointers; depth-limited.
bool dns_name(const uint8_t* msg, size_t len, size_t& off, std::string& out, int depth = 0) {
  if (depth > 8) return false;
  while (true) {
    if (off >= len) return false;
    uint8_t l = msg[off];
    if (l == 0) {
      ++off;
      return true;
    }
    if ((l & 0xc0) == 0xc0) {
      if (off + 1 >= len) return false;
      size_t target = (size_t(l & 0x3f) << 8) | msg[off + 1];
      off += 2;
      return dns_name(msg, len, target, out, depth + 1);
    }
    if (off + 1 + l > len) return false;
    if (!out.empty()) out += '.';
    out.append(reinterpret_cast<const char*>(msg + off + 1), l);
    off += 1 + l;
  }
}

void parse_dns(const uint8_t* msg, size_t len, TraceEvent& ev, std::vector<TraceEvent>& out) {
  if (len < 12) return;
  uint16_t flags = uint16_t(msg[2]) << 8 | msg[3];
  bool response = flags & 0x8000;
  uint16_t qdcount = uint16_t(msg[4]) << 8 | msg[5];
  uint16_t ancount = uint16_t(msg[6]) << 8 | msg[7];
  size_t off = 12;
  std::string qname;
  for (uint16_t i = 0; i < qdcount; ++i) {
    std::string name;
    if (!dns_name(msg, len, off, name, 0)) return;
    if (off + 4 > len) return;
    off += 4;
    if (i == 0) qname = name;
  }
  if (!response) {
    ev.kind = EventKind::DnsQuery;
    ev.dns_name = qname;
    if (!qname.empty()) out.push_back(ev);
    return;
  }
  ev.kind = EventKind::DnsAnswer;
  ev.dns_name = qname;
  for (uint16_t i = 0; i < ancount; ++i) {
    std::string name;
    if (!dns_name(msg, len, off, name, 0)) break;
    if (off + 10 > len) break;
    uint16_t type = uint16_t(msg[off]) << 8 | msg[off + 1];
    uint16_t rdlen = uint16_t(msg[off + 8]) << 8 | msg[off + 9];
    off += 10;
    if (off + rdlen > len) break;
    if (type == 1 && rdlen == 4) {
      uint32_t a = uint32_t(msg[off]) << 24 | uint32_t(msg[off + 1]) << 16 |
                   uint32_t(msg[off + 2]) << 8 | msg[off + 3];
      ev.resolved_ips.push_back(ipv4_str(a));
    } else if (type == 5) {
      std::string cname;
      size_t coff = off;
      if (dns_name(msg, len, coff, cname, 0)) ev.dns_cnames.push_back(cname);
    }
    off += rdlen;
  }
  if (!qname.empty() && !ev.resolved_ips.empty()) out.push_back(ev);
}

// SNI host_name from a TLS ClientHello, empty when absent or not a ClientHello.
std::string tls_sni(const uint8_t* d, size_t len) {
  // TLS record: type 0x16, version 0x03xx, then handshake type 0x01.
  if (len < 9 || d[0] != 0x16 || d[1] != 0x03 || d[5] != 0x01) return {};
  size_t off = 9;          // skip record header (5) + handshake header (4)
  if (off + 34 > len) return {};
  off += 34;               // client version (2) + random (32)
  if (off >= len) return {};
  uint8_t sid_len = d[off];
  off += 1 + sid_len;
  if (off + 2 > len) return {};
  uint16_t cs_len = uint16_t(d[off]) << 8 | d[off + 1];
  off += 2 + cs_len;
  if (off + 1 > len) return {};
  uint8_t comp_len = d[off];
  off += 1 + comp_len;
  if (off + 2 > len) return {};
  uint16_t ext_total = uint16_t(d[off]) << 8 | d[off + 1];
  off += 2;
  size_t ext_end = std::min(len, off + ext_total);
  while (off + 4 <= ext_end) {
    uint16_t etype = uint16_t(d[off]) << 8 | d[off + 1];
    uint16_t elen = uint16_t(d[off + 2]) << 8 | d[off + 3];
    off += 4;
    if (off + elen > ext_end) break;
    if (etype == 0 && elen >= 5) {
      // server_name list: skip list length (2), entry type (1), read length (2).
      uint16_t nlen = uint16_t(d[off + 3]) << 8 | d[off + 4];
      if (5 + size_t(nlen) <= elen)
        return std::string(reinterpret_cast<const char*>(d + off + 5), nlen);
    }
    off += elen;
  }
  return {};
}

}  // namespace

std::vector<TraceEvent> read_pcap(std::istream& in) {
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const uint8_t* buf = reinterpret_cast<const uint8_t*>(data.data());
  size_t size = data.size();
  if (size < 24) throw Error(ErrorCode::MalformedInput, "pcap: truncated global header");

  uint32_t magic;
  std::memcpy(&magic, buf, 4);
  bool swapped;
  bool nsec;
  if (magic == kMagicUsec) {
    swapped = false;
    nsec = false;
  } else if (magic == kMagicUsecSwap) {
    swapped = true;
    nsec = false;
  } else if (magic == kMagicNsec) {
    swapped = false;
    nsec = true;
  } else if (magic == kMagicNsecSwap) {
    swapped = true;
    nsec = true;
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "pcap: unrecognized magic");
  }
  auto r32 = [&](size_t off) {
    uint32_t v;
    std::memcpy(&v, buf + off, 4);
    return swapped ? swap32(v) : v;
  };
  int linktype = static_cast<int>(r32(20));
  if (linktype != kLinkEthernet && linktype != kLinkRawIp)
    throw Error(ErrorCode::UnsupportedFormat, "pcap: link type " + std::to_string(linktype));

  std::vector<TraceEvent> events;
  // Canonical tuple -> client endpoint (ip, port); the SYN sender, else first seen.
  std::map<std::tuple<std::string, uint16_t, std::string, uint16_t, int>,
           std::pair<std::string, uint16_t>>
      clients;

  size_t off = 24;
  size_t pktno = 0;
  while (off + 16 <= size) {
    ++pktno;
    uint32_t ts_sec = r32(off);
    uint32_t ts_frac = r32(off + 4);
    uint32_t caplen = r32(off + 8);
    off += 16;
    if (off + caplen > size)
      throw Error(ErrorCode::MalformedInput, "pcap: truncated packet " + std::to_string(pktno));
    Reader pkt{buf + off, caplen};
    off += caplen;
    double ts = double(ts_sec) + double(ts_frac) / (nsec ? 1e9 : 1e6);

    if (linktype == kLinkEthernet) {
      if (pkt.n < 14) continue;
      uint16_t ethertype = pkt.be16(12);
      if (!pkt.take(14)) continue;
      if (ethertype == 0x8100) {  // 802.1Q
        if (pkt.n < 4) continue;
        ethertype = pkt.be16(2);
        pkt.take(4);
      }
      if (ethertype != kEthIpv4) continue;
    }
    if (pkt.n < 20 || (pkt.u8(0) >> 4) != 4) continue;
    size_t ihl = size_t(pkt.u8(0) & 0x0f) * 4;
    if (ihl < 20 || pkt.n < ihl) continue;
    uint8_t proto = pkt.u8(9);
    uint16_t ip_total = pkt.be16(2);
    std::string src = ipv4_str(pkt.be32(12));
    std::string dst = ipv4_str(pkt.be32(16));
    size_t l4_len = std::min<size_t>(pkt.n, ip_total) - std::min<size_t>(ihl, ip_total);
    if (!pkt.take(ihl)) continue;
    l4_len = std::min(l4_len, pkt.n);

    TraceEvent ev;
    ev.ts = ts;
    uint16_t sport = 0, dport = 0;
    const uint8_t* payload = nullptr;
    size_t payload_len = 0;
    bool syn = false, fin = false;

    if (proto == 6) {
      if (l4_len < 20) continue;
      sport = pkt.be16(0);
      dport = pkt.be16(2);
      uint8_t doff = (pkt.u8(12) >> 4) * 4;
      uint8_t flags = pkt.u8(13);
      if (doff < 20 || l4_len < doff) continue;
      payload = pkt.p + doff;
      payload_len = l4_len - doff;
      syn = (flags & kTcpSyn) && !(flags & kTcpAck);
      fin = flags & (kTcpFin | kTcpRst);
      ev.tuple.proto = L4Proto::Tcp;
    } else if (proto == 17) {
      if (l4_len < 8) continue;
      sport = pkt.be16(0);
      dport = pkt.be16(2);
      payload = pkt.p + 8;
      payload_len = l4_len - 8;
      ev.tuple.proto = L4Proto::Udp;
    } else {
      continue;
    }

    ev.tuple.src_ip = src;
    ev.tuple.src_port = sport;
    ev.tuple.dst_ip = dst;
    ev.tuple.dst_port = dport;

    auto key = ev.tuple.canonical();
    auto cit = clients.find(key);
    if (cit == clients.end() || syn)
      cit = clients.insert_or_assign(key, std::make_pair(src, sport)).first;
    ev.dir = (cit->second == std::make_pair(src, sport)) ? Direction::Up : Direction::Down;

    if (ev.tuple.proto == L4Proto::Udp && (sport == 53 || dport == 53)) {
      parse_dns(payload, payload_len, ev, events);
      continue;
    }

    if (syn) {
      TraceEvent e = ev;
      e.kind = EventKind::FlowSyn;
      events.push_back(e);
    }
    if (ev.tuple.proto == L4Proto::Tcp && payload_len > 0) {
      std::string sni = tls_sni(payload, payload_len);
      if (!sni.empty()) {
        TraceEvent e = ev;
        e.kind = EventKind::TlsSni;
        e.sni_name = sni;
        events.push_back(e);
      }
    }
    if (payload_len > 0) {
      TraceEvent e = ev;
      e.kind = EventKind::Data;
      e.payload_bytes = payload_len;
      events.push_back(e);
    }
    if (fin) {
      TraceEvent e = ev;
      e.kind = EventKind::FlowFin;
      events.push_back(e);
    }
  }
  return events;
}

}  // namespace mcpa
