#include "mcpa/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <random>

#include <json.hpp>

#include "mcpa/error.hpp"

namespace mcpa::sim {

namespace {

using nlohmann::json;

struct FlowRef {
  int domain = -1;
  int flow = -1;
  bool operator==(const FlowRef& o) const = default;
};

FlowRef parse_flow_ref(const SimScenario& sc, const std::string& ref) {
  std::string domain = ref;
  int flow = -1;
  auto pos = ref.rfind(':');
  if (pos != std::string::npos) {
    domain = ref.substr(0, pos);
    flow = std::stoi(ref.substr(pos + 1));
  }
  for (size_t i = 0; i < sc.domains.size(); ++i) {
    if (sc.domains[i].name != domain) continue;
    if (flow >= static_cast<int>(sc.domains[i].flows.size()))
      throw Error(ErrorCode::UnknownDomain, "flow reference '" + ref + "' out of range");
    return {static_cast<int>(i), flow};  // flow == -1: whole domain
  }
  throw Error(ErrorCode::UnknownDomain, "flow reference '" + ref + "': no such domain");
}

int domain_index(const SimScenario& sc, const std::string& name) {
  for (size_t i = 0; i < sc.domains.size(); ++i)
    if (sc.domains[i].name == name) return static_cast<int>(i);
  throw Error(ErrorCode::UnknownDomain, name);
}

std::string domain_ip(int domain_idx) {
  return "10.1." + std::to_string(domain_idx + 1) + ".1";
}

// Resolved timing of one flow in one run.
struct FlowTiming {
  double start = 0.0;  // first event (DNS query or SYN)
  double end = 0.0;    // last data event
  std::vector<double> burst_starts;
  std::vector<double> burst_durations;
  std::vector<uint64_t> burst_bytes;
};

struct RunPlan {
  std::vector<std::vector<FlowTiming>> timing;  // [domain][flow]
};

// Pre-drawn jitter in declaration order so lazy evaluation cannot reorder draws.
struct JitterTable {
  std::vector<std::vector<double>> flow_start;              // [domain][flow]
  std::vector<std::vector<std::vector<double>>> burst_gap;  // [domain][flow][burst]
  std::vector<std::vector<std::vector<double>>> burst_scale;
};

JitterTable draw_jitter(const SimScenario& sc, uint64_t run_index,
                        const std::optional<std::string>& throttled) {
  std::hash<std::string> h;
  std::seed_seq seq{sc.seed, run_index, static_cast<uint64_t>(h(throttled.value_or("")))};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> jitter(0.0, sc.noise.timing_jitter_sd);
  std::normal_distribution<double> byte_jitter(0.0, sc.noise.byte_jitter_fraction);
  bool timing = sc.noise.timing_jitter_sd > 0;
  bool bytes = sc.noise.byte_jitter_fraction > 0;

  JitterTable t;
  for (const auto& d : sc.domains) {
    t.flow_start.emplace_back();
    t.burst_gap.emplace_back();
    t.burst_scale.emplace_back();
    for (const auto& f : d.flows) {
      t.flow_start.back().push_back(timing ? jitter(rng) : 0.0);
      t.burst_gap.back().emplace_back();
      t.burst_scale.back().emplace_back();
      for (size_t b = 0; b < f.bursts.size(); ++b) {
        t.burst_gap.back().back().push_back(timing ? jitter(rng) : 0.0);
        t.burst_scale.back().back().push_back(bytes ? byte_jitter(rng) : 0.0);
      }
    }
  }
  return t;
}

RunPlan plan_run(const SimScenario& sc, const JitterTable& jit,
                 const std::optional<std::string>& throttled, double throttle_rate) {
  int throttled_idx = throttled ? domain_index(sc, *throttled) : -1;

  // Domain-level dependency parents.
  std::vector<std::vector<int>> parents(sc.domains.size());
  for (const auto& [x, y] : sc.dependency_graph)
    parents[domain_index(sc, y)].push_back(domain_index(sc, x));

  RunPlan plan;
  plan.timing.resize(sc.domains.size());
  for (size_t d = 0; d < sc.domains.size(); ++d)
    plan.timing[d].resize(sc.domains[d].flows.size());

  enum class State { Unvisited, Visiting, Done };
  std::vector<std::vector<State>> state(sc.domains.size());
  for (size_t d = 0; d < sc.domains.size(); ++d)
    state[d].assign(sc.domains[d].flows.size(), State::Unvisited);

  std::function<const FlowTiming&(int, int)> resolve = [&](int d, int f) -> const FlowTiming& {
    auto& st = state[d][f];
    if (st == State::Done) return plan.timing[d][f];
    if (st == State::Visiting)
      throw Error(ErrorCode::InvalidConfig, "dependency cycle through " + sc.domains[d].name);
    st = State::Visiting;

    const FlowSpec& spec = sc.domains[d].flows[f];
    double anchor;
    if (!spec.after_flow.empty()) {
      FlowRef ref = parse_flow_ref(sc, spec.after_flow);
      if (ref.flow >= 0) {
        anchor = resolve(ref.domain, ref.flow).end;
      } else {
        anchor = 0.0;
        for (size_t j = 0; j < sc.domains[ref.domain].flows.size(); ++j)
          anchor = std::max(anchor, resolve(ref.domain, static_cast<int>(j)).end);
      }
    } else {
      int w = spec.window;
      if (w < 0 || w >= static_cast<int>(sc.click_times.size()))
        throw Error(ErrorCode::InvalidConfig, "flow window index out of range");
      anchor = sc.click_times[w];
      for (int p : parents[d])
        for (size_t j = 0; j < sc.domains[p].flows.size(); ++j)
          anchor = std::max(anchor, resolve(p, static_cast<int>(j)).end);
    }

    FlowTiming t;
    t.start = anchor + std::max(0.0, spec.start_offset + jit.flow_start[d][f]);
    double cursor = t.start + spec.dns_duration + spec.handshake_duration;
    t.end = cursor;
    for (size_t b = 0; b < spec.bursts.size(); ++b) {
      const BurstSpec& burst = spec.bursts[b];
      cursor += std::max(0.0, burst.gap_before + jit.burst_gap[d][f][b]);
      double scale = std::max(0.05, 1.0 + jit.burst_scale[d][f][b]);
      auto bytes = static_cast<uint64_t>(
          std::max(1.0, std::round(static_cast<double>(burst.bytes) * scale)));
      double duration = burst.duration;
      if (static_cast<int>(d) == throttled_idx)
        duration = std::max(duration, static_cast<double>(bytes) * 8.0 / throttle_rate);
      t.burst_starts.push_back(cursor);
      t.burst_durations.push_back(duration);
      t.burst_bytes.push_back(bytes);
      cursor += duration;
      t.end = cursor;
    }
    plan.timing[d][f] = std::move(t);
    st = State::Done;
    return plan.timing[d][f];
  };

  for (size_t d = 0; d < sc.domains.size(); ++d)
    for (size_t f = 0; f < sc.domains[d].flows.size(); ++f)
      resolve(static_cast<int>(d), static_cast<int>(f));
  return plan;
}

void emit_flow(std::vector<TraceEvent>& out, const SimScenario& sc, int d, int f,
               const FlowTiming& t, uint16_t client_port) {
  const FlowSpec& spec = sc.domains[d].flows[f];
  const std::string& name = sc.domains[d].name;
  std::string server_ip = domain_ip(d);
  FiveTuple tuple{"10.0.0.2", client_port, server_ip, 443, L4Proto::Tcp};

  auto push = [&](double ts, EventKind kind, Direction dir, uint64_t bytes) {
    TraceEvent ev;
    ev.ts = ts;
    ev.kind = kind;
    ev.tuple = dir == Direction::Up ? tuple : tuple.reversed();
    ev.dir = dir;
    ev.payload_bytes = bytes;
    out.push_back(std::move(ev));
  };

  double cursor = t.start;
  if (spec.dns_duration > 0) {
    FiveTuple dns_tuple{"10.0.0.2", static_cast<uint16_t>(client_port + 10000), "10.0.0.53", 53,
                        L4Proto::Udp};
    TraceEvent q;
    q.ts = cursor;
    q.kind = EventKind::DnsQuery;
    q.tuple = dns_tuple;
    q.dir = Direction::Up;
    q.dns_name = name;
    out.push_back(q);
    TraceEvent a;
    a.ts = cursor + spec.dns_duration;
    a.kind = EventKind::DnsAnswer;
    a.tuple = dns_tuple.reversed();
    a.dir = Direction::Down;
    a.dns_name = name;
    a.resolved_ips = {server_ip};
    out.push_back(a);
    cursor += spec.dns_duration;
  }
  push(cursor, EventKind::FlowSyn, Direction::Up, 0);
  if (spec.handshake_duration > 0) {
    TraceEvent sni;
    sni.ts = cursor + 0.4 * spec.handshake_duration;
    sni.kind = EventKind::TlsSni;
    sni.tuple = tuple;
    sni.dir = Direction::Up;
    sni.sni_name = name;
    out.push_back(sni);
  }

  double last = cursor + spec.handshake_duration;
  for (size_t b = 0; b < t.burst_starts.size(); ++b) {
    double start = t.burst_starts[b];
    double duration = t.burst_durations[b];
    uint64_t bytes = t.burst_bytes[b];
    // Packet spacing must stay under 2x the flow RTT (the measured RTT is the
    // handshake duration) so a nominal burst assembles as one burst, and under
    // the idle threshold so a throttled burst never splits the window.
    double spacing = spec.handshake_duration > 0
                         ? std::min(0.4, 1.5 * spec.handshake_duration)
                         : 0.075;
    auto n = static_cast<int64_t>(std::ceil(duration / spacing)) + 1;
    n = std::clamp<int64_t>(n, 2, 200000);
    if (static_cast<uint64_t>(n) > bytes) n = std::max<uint64_t>(bytes, 1);
    uint64_t per = bytes / static_cast<uint64_t>(n);
    for (int64_t k = 0; k < n; ++k) {
      double ts = n == 1 ? start + duration
                         : start + duration * static_cast<double>(k) / static_cast<double>(n - 1);
      uint64_t sz = (k == n - 1) ? bytes - per * static_cast<uint64_t>(n - 1) : per;
      push(ts, EventKind::Data, Direction::Down, sz);
      last = ts;
    }
  }
  push(last + 0.005, EventKind::FlowFin, Direction::Up, 0);
}

}  // namespace

std::vector<TraceEvent> generate_run(const SimScenario& scenario, int run_index,
                                     const std::optional<std::string>& throttled_domain,
                                     double throttle_rate) {
  if (throttled_domain) domain_index(scenario, *throttled_domain);  // UNKNOWN_DOMAIN check
  auto jitter = draw_jitter(scenario, static_cast<uint64_t>(run_index), throttled_domain);
  auto plan = plan_run(scenario, jitter, throttled_domain, throttle_rate);

  std::vector<TraceEvent> events;
  uint16_t port = 40000;
  for (size_t d = 0; d < scenario.domains.size(); ++d)
    for (size_t f = 0; f < scenario.domains[d].flows.size(); ++f)
      emit_flow(events, scenario, static_cast<int>(d), static_cast<int>(f), plan.timing[d][f],
                port++);
  std::stable_sort(events.begin(), events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) { return a.ts < b.ts; });
  return events;
}

std::vector<double> rebased_clicks(const SimScenario& scenario,
                                   const std::vector<TraceEvent>& run_events) {
  double t0 = run_events.empty() ? 0.0 : run_events.front().ts;
  std::vector<double> clicks;
  for (double c : scenario.click_times) clicks.push_back(c - t0);
  return clicks;
}

ExperimentSet generate_experiment_set(const SimScenario& scenario, int runs_per_condition,
                                      const AnalysisConfig& cfg, double throttle_rate) {
  if (runs_per_condition < 2)
    throw Error(ErrorCode::InvalidConfig, "runs_per_condition must be >= 2");
  auto analyze = [&](std::vector<TraceEvent> events) {
    if (!events.empty()) {
      double t0 = events.front().ts;
      for (auto& ev : events) ev.ts -= t0;
    }
    return analyze_events(events, cfg);
  };

  ExperimentSet ex;
  ex.scenario_id = scenario.scenario_id;
  ex.runs_per_condition = runs_per_condition;
  ex.throttle_rate = throttle_rate;
  for (int r = 0; r < runs_per_condition; ++r)
    ex.baseline_runs.push_back(analyze(generate_run(scenario, r, std::nullopt, throttle_rate)));
  for (const auto& d : scenario.domains)
    for (int r = 0; r < runs_per_condition; ++r)
      ex.shaped_runs[d.name].push_back(
          analyze(generate_run(scenario, r, d.name, throttle_rate)));
  return ex;
}

GroundTruth ground_truth(const SimScenario& scenario, const AnalysisConfig& cfg,
                         double throttle_rate, double tolerance) {
  SimScenario quiet = scenario;
  quiet.noise.timing_jitter_sd = 0.0;
  quiet.noise.byte_jitter_fraction = 0.0;

  auto analyze = [&](const std::optional<std::string>& throttled) {
    auto events = generate_run(quiet, 0, throttled, throttle_rate);
    if (!events.empty()) {
      double t0 = events.front().ts;
      for (auto& ev : events) ev.ts -= t0;
    }
    return analyze_events(events, cfg);
  };

  GroundTruth gt;
  auto base = analyze(std::nullopt);
  if (base.windows.empty() || !base.windows[0].has_data)
    throw Error(ErrorCode::InvalidConfig, "scenario produces no analyzable window");
  gt.baseline_tdt = base.windows[0].metrics.tdt;
  const auto& base_completion = base.windows[0].waterfall.domain_completion;
  double base_start = base.windows[0].window.start_ts;

  for (const auto& d : scenario.domains) {
    auto shaped = analyze(d.name);
    if (shaped.windows.empty() || !shaped.windows[0].has_data)
      throw Error(ErrorCode::InvalidConfig, "throttled run has no analyzable window");
    if (shaped.windows[0].metrics.tdt > gt.baseline_tdt + tolerance) gt.critical.insert(d.name);

    double shaped_start = shaped.windows[0].window.start_ts;
    for (const auto& [y, ty] : shaped.windows[0].waterfall.domain_completion) {
      if (y == d.name) continue;
      auto it = base_completion.find(y);
      if (it == base_completion.end()) continue;
      if ((ty - shaped_start) > (it->second - base_start) + tolerance)
        gt.dependencies.emplace(d.name, y);
    }
  }
  return gt;
}

void validate_scenario(const SimScenario& scenario) {
  std::set<std::string> names;
  for (const auto& d : scenario.domains)
    if (!names.insert(d.name).second)
      throw Error(ErrorCode::InvalidConfig, "duplicate domain " + d.name);
  for (const auto& [x, y] : scenario.dependency_graph) {
    domain_index(scenario, x);
    domain_index(scenario, y);
  }
  for (const auto& p : scenario.planted_critical)
    if (!names.count(p))
      throw Error(ErrorCode::InvalidConfig, "planted critical domain " + p + " not declared");
  if (scenario.click_times.empty())
    throw Error(ErrorCode::InvalidConfig, "scenario needs at least one click time");

  // Cycle check plus planted-set consistency against the noiseless oracle.
  auto jitter = draw_jitter(scenario, 0, std::nullopt);
  plan_run(scenario, jitter, std::nullopt, 1000.0);
  if (!scenario.planted_critical.empty()) {
    auto gt = ground_truth(scenario);
    if (gt.critical != scenario.planted_critical)
      throw Error(ErrorCode::InvalidConfig,
                  "ambiguous scenario: planted critical set does not match construction");
  }
}

SimScenario load_scenario(std::istream& in) {
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedInput, std::string("scenario: ") + e.what());
  }
  try {
    SimScenario sc;
    sc.scenario_id = obj.value("scenario_id", "scenario");
    sc.seed = obj.value("seed", uint64_t{1});
    if (obj.contains("click_times"))
      sc.click_times = obj["click_times"].get<std::vector<double>>();
    if (obj.contains("noise")) {
      sc.noise.timing_jitter_sd = obj["noise"].value("timing_jitter_sd", 0.020);
      sc.noise.byte_jitter_fraction = obj["noise"].value("byte_jitter_fraction", 0.0);
    }
    if (obj.contains("dependency_graph"))
      for (const auto& e : obj["dependency_graph"])
        sc.dependency_graph.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    if (obj.contains("planted_critical"))
      for (const auto& p : obj["planted_critical"]) sc.planted_critical.insert(p.get<std::string>());
    for (const auto& dj : obj.at("domains")) {
      DomainSpec d;
      d.name = dj.at("name").get<std::string>();
      d.class_hint = dj.value("class_hint", "");
      for (const auto& fj : dj.value("flows", json::array())) {
        FlowSpec f;
        f.start_offset = fj.value("start_offset", 0.0);
        f.window = fj.value("window", 0);
        f.after_flow = fj.value("after_flow", "");
        f.dns_duration = fj.value("dns_duration", 0.020);
        f.handshake_duration = fj.value("handshake_duration", 0.050);
        for (const auto& bj : fj.value("bursts", json::array())) {
          BurstSpec b;
          b.bytes = bj.at("bytes").get<uint64_t>();
          b.duration = bj.value("duration", 0.1);
          b.gap_before = bj.value("gap_before", 0.0);
          f.bursts.push_back(b);
        }
        d.flows.push_back(std::move(f));
      }
      sc.domains.push_back(std::move(d));
    }
    return sc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("scenario: ") + e.what());
  }
}

SimScenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open " + path);
  return load_scenario(in);
}

}  // namespace mcpa::sim
