#include "mcpa/cpa.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "mcpa/error.hpp"

namespace mcpa {

const char* to_string(DomainClass c) {
  switch (c) {
    case DomainClass::AdHoc: return "AD_HOC";
    case DomainClass::Cdn: return "CDN";
    case DomainClass::OthServ: return "OTH_SERV";
  }
  return "?";
}

PValueResult run_pvalue_test(const std::vector<double>& baseline_values,
                             const std::vector<double>& shaped_values, double significance) {
  if (baseline_values.size() < 2)
    throw Error(ErrorCode::InsufficientBaseline, "need >= 2 baseline values");
  if (shaped_values.empty())
    throw Error(ErrorCode::InsufficientBaseline, "need >= 1 shaped value");

  double mean = std::accumulate(baseline_values.begin(), baseline_values.end(), 0.0) /
                static_cast<double>(baseline_values.size());
  double ss = 0.0;
  for (double v : baseline_values) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(baseline_values.size() - 1));
  // Degenerate-variance floor: zero-jitter baselines must not produce z = inf.
  double s0 = std::max({sd, 0.01 * std::abs(mean), 1e-3});

  PValueResult result;
  result.is_significant = true;
  for (double x : shaped_values) {
    double z = (x - mean) / s0;
    // One-sided (delay only): p = P[N(0,1) >= z].
    double p = 0.5 * std::erfc(z / std::sqrt(2.0));
    result.per_run_p.push_back(p);
    if (p >= significance) result.is_significant = false;
  }
  return result;
}

namespace {

// Window counts are matched by ordinal index; runs with a count different from
// the baseline majority are discarded.
size_t reference_window_count(const ExperimentSet& ex) {
  std::map<size_t, int> counts;
  for (const auto& run : ex.baseline_runs) counts[run.windows.size()]++;
  size_t best = 0;
  int best_n = -1;
  for (const auto& [count, n] : counts)
    if (n > best_n) {
      best = count;
      best_n = n;
    }
  return best;
}

bool run_usable(const AnalyzedRun& run, size_t ref_count, int target, const char* what) {
  if (run.windows.size() != ref_count) {
    std::cerr << "warning: discarding " << what << " run with " << run.windows.size()
              << " windows (expected " << ref_count << ")\n";
    return false;
  }
  return target >= 0 && static_cast<size_t>(target) < run.windows.size() &&
         run.windows[target].has_data;
}

std::vector<double> collect_tdt(const std::vector<AnalyzedRun>& runs, size_t ref_count,
                                int target, const char* what) {
  std::vector<double> values;
  for (const auto& run : runs)
    if (run_usable(run, ref_count, target, what)) values.push_back(run.windows[target].metrics.tdt);
  return values;
}

std::vector<double> collect_completion(const std::vector<AnalyzedRun>& runs, size_t ref_count,
                                       int target, const std::string& domain, const char* what) {
  std::vector<double> values;
  for (const auto& run : runs) {
    if (!run_usable(run, ref_count, target, what)) continue;
    const auto& dc = run.windows[target].waterfall.domain_completion;
    auto it = dc.find(domain);
    if (it != dc.end()) values.push_back(it->second - run.windows[target].window.start_ts);
  }
  return values;
}

std::map<std::string, PValueResult> critical_tests(const ExperimentSet& ex) {
  size_t ref = reference_window_count(ex);
  auto baseline = collect_tdt(ex.baseline_runs, ref, ex.target_window, "baseline");
  std::map<std::string, PValueResult> tests;
  for (const auto& [domain, runs] : ex.shaped_runs) {
    if (runs.empty()) throw Error(ErrorCode::MissingShapedRuns, domain);
    auto shaped = collect_tdt(runs, ref, ex.target_window, domain.c_str());
    if (shaped.empty()) throw Error(ErrorCode::MissingShapedRuns, domain + " (all discarded)");
    tests.emplace(domain, run_pvalue_test(baseline, shaped, ex.significance));
  }
  return tests;
}

struct Interval {
  double start, end;
};

double union_length(std::vector<Interval> intervals) {
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start; });
  double total = 0.0, cur_end = -1.0, cur_start = 0.0;
  bool open = false;
  for (const auto& iv : intervals) {
    if (iv.end <= iv.start) continue;
    if (!open || iv.start > cur_end) {
      if (open) total += cur_end - cur_start;
      cur_start = iv.start;
      cur_end = iv.end;
      open = true;
    } else {
      cur_end = std::max(cur_end, iv.end);
    }
  }
  if (open) total += cur_end - cur_start;
  return total;
}

}  // namespace

std::set<std::string> find_critical_set(const ExperimentSet& experiments) {
  std::set<std::string> critical;
  for (const auto& [domain, test] : critical_tests(experiments))
    if (test.is_significant) critical.insert(domain);
  return critical;
}

std::set<std::pair<std::string, std::string>> find_dependencies(const ExperimentSet& experiments) {
  size_t ref = reference_window_count(experiments);
  int target = experiments.target_window;

  // Domains eligible as dependency endpoints: present in >= 80% of baseline runs.
  std::map<std::string, int> presence;
  int usable_runs = 0;
  for (const auto& run : experiments.baseline_runs) {
    if (run.windows.size() != ref || !(static_cast<size_t>(target) < run.windows.size()))
      continue;
    ++usable_runs;
    for (const auto& [domain, ts] : run.windows[target].waterfall.domain_completion)
      presence[domain]++;
  }
  std::set<std::string> eligible;
  for (const auto& [domain, n] : presence)
    if (usable_runs > 0 && double(n) >= 0.8 * double(usable_runs)) eligible.insert(domain);

  std::set<std::pair<std::string, std::string>> edges;
  for (const auto& [x, shaped] : experiments.shaped_runs) {
    if (shaped.empty()) throw Error(ErrorCode::MissingShapedRuns, x);
    for (const auto& y : eligible) {
      if (y == x) continue;
      auto baseline = collect_completion(experiments.baseline_runs, ref, target, y, "baseline");
      auto under_x = collect_completion(shaped, ref, target, y, x.c_str());
      if (baseline.size() < 2 || under_x.empty()) continue;
      if (run_pvalue_test(baseline, under_x, experiments.significance).is_significant)
        edges.emplace(x, y);
    }
  }
  return edges;
}

DomainClass classify_domain(const std::string& domain, const ClassifyConfig& cfg) {
  for (const auto& app : cfg.app_domains) {
    if (domain == app) return DomainClass::AdHoc;
    if (domain.size() > app.size() && domain.ends_with(app) &&
        domain[domain.size() - app.size() - 1] == '.')
      return DomainClass::AdHoc;
  }
  for (const auto& kw : cfg.adservice_keywords)
    if (domain.find(kw) != std::string::npos) return DomainClass::OthServ;
  for (const auto& kw : cfg.cdn_keywords)
    if (domain.find(kw) != std::string::npos) return DomainClass::Cdn;
  return DomainClass::OthServ;
}

CriticalReport assemble_report(const ExperimentSet& experiments,
                               const std::set<std::string>& critical_set,
                               const std::set<std::pair<std::string, std::string>>& edges,
                               const ClassifyConfig& classify) {
  CriticalReport report;
  report.scenario_id = experiments.scenario_id;
  report.critical_set = critical_set;
  report.dependency_edges = edges;

  size_t ref = reference_window_count(experiments);
  int target = experiments.target_window;

  struct ActivePhase {
    double start, end;
    PhaseKind kind;
    DomainClass cls;
  };

  int runs_counted = 0;
  std::map<DomainClass, double> class_time, class_bytes;
  for (const auto& run : experiments.baseline_runs) {
    if (run.windows.size() != ref || !(static_cast<size_t>(target) < run.windows.size()))
      continue;
    const auto& wf = run.windows[target].waterfall;
    ++runs_counted;

    std::vector<ActivePhase> phases;
    std::vector<Interval> actives;
    double crit_bytes = 0.0, total_bytes = 0.0;
    int crit_flows = 0, total_flows = 0;
    for (const auto& row : wf.rows) {
      bool crit = critical_set.count(row.domain) > 0;
      DomainClass cls = classify_domain(row.domain, classify);
      double row_bytes = 0.0;
      for (const auto& p : row.phases) {
        if (p.kind == PhaseKind::Idle) continue;
        if (p.kind == PhaseKind::DataBurst) row_bytes += static_cast<double>(p.bytes);
        if (crit && p.end_ts > p.start_ts) {
          phases.push_back({p.start_ts, p.end_ts, p.kind, cls});
          actives.push_back({p.start_ts, p.end_ts});
        }
      }
      if (row.flow_id >= 0) {
        ++total_flows;
        total_bytes += row_bytes;
        if (crit) {
          ++crit_flows;
          crit_bytes += row_bytes;
          class_bytes[cls] += row_bytes;
          if (runs_counted == 1) report.critical_flows.push_back(row.flow_id);
        }
      }
    }

    report.time_on_cp += union_length(actives);
    report.volume_breakdown.critical_bytes += crit_bytes;
    report.volume_breakdown.total_bytes += total_bytes;
    report.volume_breakdown.critical_flows_count += crit_flows;
    report.volume_breakdown.total_flows_count += total_flows;

    // Attribute each instant of the union: DATA over HANDSHAKE over DNS, and
    // the class by AD_HOC > CDN > OTH_SERV priority among covering phases.
    std::vector<double> cuts;
    for (const auto& p : phases) {
      cuts.push_back(p.start);
      cuts.push_back(p.end);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      double a = cuts[i], b = cuts[i + 1];
      double mid = 0.5 * (a + b);
      PhaseKind best_kind = PhaseKind::Idle;
      int best_cls = -1;
      bool covered = false;
      for (const auto& p : phases) {
        if (p.start <= mid && mid < p.end) {
          covered = true;
          if (p.kind == PhaseKind::DataBurst)
            best_kind = PhaseKind::DataBurst;
          else if (p.kind == PhaseKind::Handshake && best_kind != PhaseKind::DataBurst)
            best_kind = PhaseKind::Handshake;
          else if (p.kind == PhaseKind::Dns && best_kind == PhaseKind::Idle)
            best_kind = PhaseKind::Dns;
          int rank = p.cls == DomainClass::AdHoc ? 0 : (p.cls == DomainClass::Cdn ? 1 : 2);
          if (best_cls < 0 || rank < best_cls) best_cls = rank;
        }
      }
      if (!covered) continue;
      double len = b - a;
      switch (best_kind) {
        case PhaseKind::DataBurst: report.time_on_cp_breakdown.data += len; break;
        case PhaseKind::Handshake: report.time_on_cp_breakdown.handshake += len; break;
        case PhaseKind::Dns: report.time_on_cp_breakdown.dns += len; break;
        default: break;
      }
      DomainClass cls = best_cls == 0 ? DomainClass::AdHoc
                                      : (best_cls == 1 ? DomainClass::Cdn : DomainClass::OthServ);
      class_time[cls] += len;
    }
  }

  if (runs_counted > 0) {
    double n = static_cast<double>(runs_counted);
    report.time_on_cp /= n;
    report.time_on_cp_breakdown.dns /= n;
    report.time_on_cp_breakdown.handshake /= n;
    report.time_on_cp_breakdown.data /= n;
    report.volume_breakdown.critical_bytes /= n;
    report.volume_breakdown.total_bytes /= n;
    report.volume_breakdown.critical_flows_count /= n;
    report.volume_breakdown.total_flows_count /= n;
    double total_time = report.time_on_cp > 0 ? report.time_on_cp * n : 1.0;
    double total_b = 0.0;
    for (const auto& [cls, b] : class_bytes) total_b += b;
    for (auto cls : {DomainClass::AdHoc, DomainClass::Cdn, DomainClass::OthServ}) {
      ClassShare share;
      share.time_share = class_time.count(cls) ? class_time[cls] / total_time : 0.0;
      share.byte_share = total_b > 0 && class_bytes.count(cls) ? class_bytes[cls] / total_b : 0.0;
      report.class_breakdown[cls] = share;
    }
  }
  return report;
}

CriticalReport run_cpa(const ExperimentSet& experiments, const ClassifyConfig& classify) {
  auto tests = critical_tests(experiments);
  std::set<std::string> critical;
  std::map<std::string, std::vector<double>> per_domain_p;
  for (const auto& [domain, test] : tests) {
    if (test.is_significant) critical.insert(domain);
    per_domain_p[domain] = test.per_run_p;
  }
  auto edges = find_dependencies(experiments);
  auto report = assemble_report(experiments, critical, edges, classify);
  report.per_domain_p = std::move(per_domain_p);
  return report;
}

}  // namespace mcpa
