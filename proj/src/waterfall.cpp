#include "mcpa/waterfall.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcpa/error.hpp"

namespace mcpa {

const char* to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::Dns: return "DNS";
    case PhaseKind::Handshake: return "HANDSHAKE";
    case PhaseKind::DataBurst: return "DATA_BURST";
    case PhaseKind::Idle: return "IDLE";
  }
  return "?";
}

std::vector<Burst> split_bursts(const Flow& flow) {
  if (flow.rtt_estimate <= 0) throw Error(ErrorCode::InvalidConfig, "rtt_estimate must be > 0");
  std::vector<Burst> bursts;
  double gap_limit = 2.0 * flow.rtt_estimate;
  for (const auto& ev : flow.data_events) {
    if (bursts.empty() || ev.ts - bursts.back().end_ts > gap_limit) {
      bursts.push_back({flow.flow_id, ev.ts, ev.ts, ev.payload_bytes});
    } else {
      bursts.back().end_ts = ev.ts;
      bursts.back().bytes += ev.payload_bytes;
    }
  }
  return bursts;
}

namespace {

double clip(double t, const ActivityWindow& w) {
  return std::clamp(t, w.start_ts, w.end_ts);
}

WaterfallRow make_row(const Flow& flow, const ActivityWindow& window, bool with_dns,
                      std::pair<double, double> dns_span) {
  WaterfallRow row;
  row.flow_id = flow.flow_id;
  row.domain = flow.domain;
  row.label = flow.domain + ":" + std::to_string(flow.tuple.dst_port);
  row.rtt_defaulted = !flow.rtt_measured;

  if (with_dns) {
    Phase p{PhaseKind::Dns, clip(dns_span.first, window), clip(dns_span.second, window), 0};
    if (p.end_ts > p.start_ts) row.phases.push_back(p);
  }
  if (flow.handshake.kind != HandshakeKind::None) {
    Phase p{PhaseKind::Handshake, clip(flow.handshake.start_ts, window),
            clip(flow.handshake.end_ts, window), 0};
    if (p.end_ts > p.start_ts || flow.data_events.empty()) row.phases.push_back(p);
  }
  for (const auto& burst : split_bursts(flow)) {
    if (burst.start_ts >= window.end_ts || burst.end_ts < window.start_ts) continue;
    row.phases.push_back(
        {PhaseKind::DataBurst, clip(burst.start_ts, window), clip(burst.end_ts, window),
         burst.bytes});
  }
  return row;
}

}  // namespace

Waterfall build_waterfall(const ActivityWindow& window, const std::vector<Flow>& flows,
                          const DomainTable& table) {
  Waterfall wf;
  wf.window_id = window.window_id;
  wf.start_ts = window.start_ts;
  wf.end_ts = window.end_ts;

  std::vector<const Flow*> members;
  for (const auto& flow : flows) {
    bool in = false;
    if (!flow.data_events.empty())
      in = window.contains(flow.data_events.front().ts);
    else
      in = window.contains(flow.start_ts);
    if (in) members.push_back(&flow);
  }
  std::sort(members.begin(), members.end(),
            [](const Flow* a, const Flow* b) { return a->start_ts < b->start_ts; });

  std::set<std::string> dns_attached;
  for (const Flow* flow : members) {
    bool with_dns = false;
    std::pair<double, double> span{0, 0};
    if (!dns_attached.count(flow->domain)) {
      // DNS attaches to the domain's first flow when resolution fell in the window.
      if (auto s = table.resolution_span(flow->domain, flow->start_ts)) {
        if (window.contains(s->second)) {
          with_dns = true;
          span = *s;
          dns_attached.insert(flow->domain);
        }
      }
    }
    wf.rows.push_back(make_row(*flow, window, with_dns, span));

    double completion;
    if (!flow->data_events.empty()) {
      completion = clip(flow->last_data_ts(), window);
    } else {
      completion = clip(flow->handshake.end_ts, window);
    }
    auto [it, inserted] = wf.domain_completion.emplace(flow->domain, completion);
    if (!inserted) it->second = std::max(it->second, completion);
  }
  return wf;
}

namespace {

std::string render_ascii(const Waterfall& wf, const std::set<std::string>* critical) {
  constexpr int kCols = 100;
  std::ostringstream out;
  out << "window " << wf.window_id << " [" << wf.start_ts << ", " << wf.end_ts << ")\n";
  double dur = wf.end_ts - wf.start_ts;
  if (dur <= 0) dur = 1.0;
  size_t label_width = 0;
  for (const auto& row : wf.rows) label_width = std::max(label_width, row.label.size());

  for (const auto& row : wf.rows) {
    bool is_critical = critical && critical->count(row.domain) > 0;
    std::string lane(kCols, ' ');
    auto col = [&](double t) {
      int c = static_cast<int>(std::floor((t - wf.start_ts) / dur * kCols));
      return std::clamp(c, 0, kCols - 1);
    };
    auto paint = [&](double a, double b, char glyph) {
      for (int c = col(a); c <= col(b); ++c) lane[c] = glyph;
    };
    // Idle between consecutive phases first so real phases paint over it.
    for (size_t i = 1; i < row.phases.size(); ++i)
      if (row.phases[i].start_ts > row.phases[i - 1].end_ts)
        paint(row.phases[i - 1].end_ts, row.phases[i].start_ts, '.');
    for (const auto& p : row.phases) {
      char glyph = '=';
      switch (p.kind) {
        case PhaseKind::Dns: glyph = 'D'; break;
        case PhaseKind::Handshake: glyph = '-'; break;
        case PhaseKind::DataBurst: glyph = is_critical ? '#' : '='; break;
        case PhaseKind::Idle: glyph = '.'; break;
      }
      paint(p.start_ts, p.end_ts, glyph);
    }
    out << row.label << std::string(label_width - row.label.size() + 1, ' ') << "|" << lane
        << "|";
    if (row.rtt_defaulted) out << " (rtt default)";
    out << "\n";
  }
  return out.str();
}

std::string render_svg(const Waterfall& wf, const std::set<std::string>* critical) {
  constexpr double kWidth = 1000.0;
  constexpr double kRowHeight = 18.0;
  constexpr double kLabelWidth = 260.0;
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  double dur = wf.end_ts - wf.start_ts;
  if (dur <= 0) dur = 1.0;
  double height = kRowHeight * (static_cast<double>(wf.rows.size()) + 1);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (kLabelWidth + kWidth)
      << "\" height=\"" << height << "\">\n";
  auto x = [&](double t) { return kLabelWidth + (t - wf.start_ts) / dur * kWidth; };
  int r = 0;
  for (const auto& row : wf.rows) {
    bool is_critical = critical && critical->count(row.domain) > 0;
    double y = kRowHeight * static_cast<double>(r);
    out << "  <g class=\"row" << (is_critical ? " critical" : "") << "\">\n";
    out << "    <text x=\"0\" y=\"" << (y + 13) << "\" font-size=\"11\">" << row.label
        << "</text>\n";
    for (size_t i = 1; i < row.phases.size(); ++i) {
      if (row.phases[i].start_ts <= row.phases[i - 1].end_ts) continue;
      out << "    <line class=\"idle\" x1=\"" << x(row.phases[i - 1].end_ts) << "\" y1=\""
          << (y + 9) << "\" x2=\"" << x(row.phases[i].start_ts) << "\" y2=\"" << (y + 9)
          << "\" stroke=\"#999\" stroke-dasharray=\"2,2\"/>\n";
    }
    for (const auto& p : row.phases) {
      const char* cls = "data";
      const char* fill = is_critical ? "#c0392b" : "#2980b9";  // saturated: data
      if (p.kind == PhaseKind::Dns) {
        cls = "dns";
        fill = "#f5cba7";  // pale: control phases
      } else if (p.kind == PhaseKind::Handshake) {
        cls = "handshake";
        fill = is_critical ? "#e6b0aa" : "#aed6f1";
      }
      double x1 = x(p.start_ts);
      double w = std::max(x(p.end_ts) - x1, 1.0);
      out << "    <rect class=\"" << cls << "\" x=\"" << x1 << "\" y=\"" << (y + 4)
          << "\" width=\"" << w << "\" height=\"10\" fill=\"" << fill << "\"/>\n";
    }
    out << "  </g>\n";
    ++r;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::string render_waterfall(const Waterfall& waterfall, RenderFormat format,
                             const std::set<std::string>* critical_domains) {
  switch (format) {
    case RenderFormat::Ascii:
      return render_ascii(waterfall, critical_domains);
    case RenderFormat::Svg:
      return render_svg(waterfall, critical_domains);
  }
  throw Error(ErrorCode::UnknownFormat, "unknown render format");
}

}  // namespace mcpa
