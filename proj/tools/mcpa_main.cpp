#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcpa/analysis.hpp"
#include "mcpa/cpa.hpp"
#include "mcpa/error.hpp"
#include "mcpa/json_io.hpp"
#include "mcpa/sim.hpp"

namespace {

using nlohmann::json;

// Built-in defaults, overridden by the MCPA_CONFIG file, then by flags.
struct Options {
  std::string policy = "gradient";
  double alpha_t = 1.0;
  double alpha_b = 5000.0;
  std::string category;
  double min_window_rate = 2.0;
  bool background_filter = false;
  double percentile = 0.95;
  double significance = 0.05;
  double throttle_rate = 1000.0;
  int runs = 10;
  int target_window = 0;
  double click_tolerance = 1.0;
  int jobs = 1;
  std::vector<std::string> app_domains;
};

void apply_json(Options& o, const json& cfg) {
  o.policy = cfg.value("policy", o.policy);
  o.alpha_t = cfg.value("alpha_t", o.alpha_t);
  o.alpha_b = cfg.value("alpha_b", o.alpha_b);
  o.category = cfg.value("category", o.category);
  o.min_window_rate = cfg.value("min_window_rate", o.min_window_rate);
  o.background_filter = cfg.value("background_filter", o.background_filter);
  o.percentile = cfg.value("percentile", o.percentile);
  o.significance = cfg.value("significance", o.significance);
  o.throttle_rate = cfg.value("throttle_rate", o.throttle_rate);
  o.runs = cfg.value("runs", o.runs);
  o.target_window = cfg.value("target_window", o.target_window);
  o.click_tolerance = cfg.value("click_tolerance", o.click_tolerance);
  o.jobs = cfg.value("jobs", o.jobs);
  o.app_domains = cfg.value("app_domains", o.app_domains);
}

Options env_defaults() {
  Options o;
  if (const char* path = std::getenv("MCPA_CONFIG")) {
    std::ifstream in(path);
    if (!in)
      throw mcpa::Error(mcpa::ErrorCode::InvalidConfig,
                        std::string("MCPA_CONFIG: cannot open ") + path);
    json cfg;
    try {
      cfg = json::parse(in);
    } catch (const json::parse_error& e) {
      throw mcpa::Error(mcpa::ErrorCode::InvalidConfig,
                        std::string("MCPA_CONFIG: ") + e.what());
    }
    apply_json(o, cfg);
  }
  return o;
}

mcpa::AnalysisConfig analysis_config(const Options& o) {
  mcpa::AnalysisConfig cfg;
  if (o.policy == "naive")
    cfg.partition.policy = mcpa::PartitionPolicy::Naive;
  else if (o.policy == "gradient")
    cfg.partition.policy = mcpa::PartitionPolicy::Gradient;
  else
    throw mcpa::Error(mcpa::ErrorCode::InvalidConfig, "unknown policy " + o.policy);
  cfg.partition.alpha_t = o.alpha_t;
  cfg.partition.alpha_b = o.alpha_b;
  cfg.partition.category = o.category;
  if (!o.category.empty() && o.category == "chat")
    cfg.partition.category_overrides["chat"] = {o.alpha_t, 250.0};
  cfg.partition.min_window_rate = o.min_window_rate;
  cfg.percentile = o.percentile;
  cfg.background_filter = o.background_filter;
  return cfg;
}

int cmd_partition(const Options& o, const std::string& trace,
                  const std::optional<std::string>& clicks_path) {
  auto cfg = analysis_config(o);
  auto events = mcpa::read_trace_file(trace);
  auto windows = mcpa::partition(events, cfg.partition);
  if (cfg.background_filter) windows = mcpa::filter_background(windows, cfg.partition);

  json out;
  out["windows"] = json::array();
  for (const auto& w : windows) out["windows"].push_back(mcpa::window_to_json(w));
  if (clicks_path) {
    std::ifstream in(*clicks_path);
    if (!in) throw mcpa::Error(mcpa::ErrorCode::MalformedInput, "cannot open " + *clicks_path);
    auto clicks = mcpa::read_click_log(in);
    auto score = mcpa::evaluate_partitioning(windows, clicks, o.click_tolerance);
    out["precision"] = score.precision;
    out["recall"] = score.recall;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_metrics(const Options& o, const std::string& trace, int window,
                const std::vector<double>& sweep) {
  auto run = mcpa::analyze_trace_file(trace, analysis_config(o));
  json out;
  out["windows"] = json::array();
  for (const auto& aw : run.windows) {
    if (window >= 0 && aw.window.window_id != window) continue;
    json entry = mcpa::window_to_json(aw.window);
    if (aw.has_data) {
      entry["metrics"] = mcpa::metrics_to_json(aw.metrics);
      if (!sweep.empty()) {
        auto evo = mcpa::byte_evolution(aw.window, run.flows);
        json sw = json::array();
        for (const auto& [p, tdt] : mcpa::percentile_sweep(evo, sweep))
          sw.push_back({{"percentile", p}, {"tdt", tdt}});
        entry["tdt_sweep"] = std::move(sw);
      }
    }
    out["windows"].push_back(std::move(entry));
  }
  if (window >= 0 && out["windows"].empty())
    throw mcpa::Error(mcpa::ErrorCode::MalformedInput,
                      "window " + std::to_string(window) + " not found");
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_waterfall(const Options& o, const std::string& trace, int window,
                  const std::string& render, const std::optional<std::string>& critical_path,
                  const std::optional<std::string>& out_path) {
  auto run = mcpa::analyze_trace_file(trace, analysis_config(o));
  const mcpa::AnalyzedWindow* target = nullptr;
  for (const auto& aw : run.windows)
    if (aw.window.window_id == window) target = &aw;
  if (!target)
    throw mcpa::Error(mcpa::ErrorCode::MalformedInput,
                      "window " + std::to_string(window) + " not found");

  std::set<std::string> critical;
  if (critical_path) {
    std::ifstream in(*critical_path);
    if (!in) throw mcpa::Error(mcpa::ErrorCode::MalformedInput, "cannot open " + *critical_path);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) critical.insert(line);
  }

  mcpa::RenderFormat fmt;
  if (render == "svg")
    fmt = mcpa::RenderFormat::Svg;
  else if (render == "ascii")
    fmt = mcpa::RenderFormat::Ascii;
  else if (render == "json")
    fmt = mcpa::RenderFormat::Svg;  // placeholder, handled below
  else
    throw mcpa::Error(mcpa::ErrorCode::UnknownFormat, "unknown render format " + render);

  std::string text = render == "json"
                         ? mcpa::waterfall_to_json(target->waterfall).dump(2) + "\n"
                         : mcpa::render_waterfall(target->waterfall, fmt,
                                                  critical.empty() ? nullptr : &critical);
  if (out_path) {
    std::ofstream out(*out_path);
    if (!out) throw mcpa::Error(mcpa::ErrorCode::MalformedInput, "cannot open " + *out_path);
    out << text;
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_cpa(Options o, const std::string& manifest_path, const CLI::App* sub) {
  auto manifest = mcpa::load_manifest_file(manifest_path);
  // Manifest config sits between MCPA_CONFIG and explicit flags.
  if (!manifest.config_overrides.empty()) {
    Options merged = o;
    apply_json(merged, manifest.config_overrides);
    auto keep = [&](const std::string& flag, auto member) {
      if (sub->count(flag)) merged.*member = o.*member;
    };
    keep("--policy", &Options::policy);
    keep("--alpha-t", &Options::alpha_t);
    keep("--alpha-b", &Options::alpha_b);
    keep("--percentile", &Options::percentile);
    keep("--significance", &Options::significance);
    keep("--throttle", &Options::throttle_rate);
    keep("--target-window", &Options::target_window);
    keep("--jobs", &Options::jobs);
    o = merged;
  }
  auto ex = mcpa::load_experiment_set(manifest, analysis_config(o), o.throttle_rate,
                                      o.significance, o.target_window, o.jobs);
  mcpa::ClassifyConfig classify;
  classify.app_domains.insert(o.app_domains.begin(), o.app_domains.end());
  auto report = mcpa::run_cpa(ex, classify);
  std::cout << mcpa::report_to_json(report).dump(2) << "\n";
  return 0;
}

int cmd_simulate(const Options& o, const std::string& scenario_path, int runs, uint64_t seed,
                 bool seed_set, const std::string& out_dir) {
  auto scenario = mcpa::sim::load_scenario_file(scenario_path);
  if (seed_set) scenario.seed = seed;
  mcpa::sim::validate_scenario(scenario);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::path base(out_dir);

  mcpa::RunManifest manifest;
  manifest.scenario_id = scenario.scenario_id;

  auto pad = [](int n) {
    std::string s = std::to_string(n);
    return std::string(s.size() >= 2 ? 0 : 2 - s.size(), '0') + s;
  };
  auto write_run = [&](const std::string& stem, int run_index,
                       const std::optional<std::string>& throttled) {
    auto events = mcpa::sim::generate_run(scenario, run_index, throttled, o.throttle_rate);
    std::string name = stem + "_" + pad(run_index) + ".jsonl";
    std::ofstream out(base / name);
    if (!out)
      throw mcpa::Error(mcpa::ErrorCode::MalformedInput, "cannot write " + (base / name).string());
    mcpa::write_jsonl(out, events);
    return std::pair{name, events};
  };

  std::vector<mcpa::TraceEvent> first_run;
  for (int r = 0; r < runs; ++r) {
    auto [name, events] = write_run("baseline", r, std::nullopt);
    manifest.baseline.push_back(name);
    if (r == 0) first_run = std::move(events);
  }
  for (const auto& d : scenario.domains)
    for (int r = 0; r < runs; ++r)
      manifest.shaped[d.name].push_back(write_run("shaped_" + d.name, r, d.name).first);

  {
    std::ofstream clicks(base / "clicks.csv");
    for (double c : mcpa::sim::rebased_clicks(scenario, first_run)) clicks << c << "\n";
    manifest.click_log = "clicks.csv";
  }
  manifest.config_overrides = {{"throttle_rate", o.throttle_rate},
                               {"significance", o.significance},
                               {"percentile", o.percentile}};

  json mj = mcpa::manifest_to_json(manifest);
  {
    std::ofstream out(base / "manifest.json");
    out << mj.dump(2) << "\n";
  }
  std::cout << mj.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    Options o = env_defaults();

    CLI::App app{"Trace-driven critical path analysis for mobile app traffic"};
    app.require_subcommand(1);

    auto add_partition_flags = [&](CLI::App* sub) {
      sub->add_option("--policy", o.policy, "naive or gradient");
      sub->add_option("--alpha-t", o.alpha_t, "idle threshold / sliding window (s)");
      sub->add_option("--alpha-b", o.alpha_b, "gradient byte threshold (B)");
      sub->add_option("--category", o.category, "app category threshold override");
      sub->add_flag("--filter-background", o.background_filter,
                    "drop windows below the window-rate floor");
    };

    std::string trace, clicks, manifest_path, scenario_path, render = "ascii";
    std::string critical_file, out_path, out_dir = ".";
    std::vector<double> sweep;
    int window = -1;
    int wf_window = 0;
    uint64_t seed = 0;

    auto* p = app.add_subcommand("partition", "Split a trace into activity windows");
    p->add_option("trace", trace)->required();
    add_partition_flags(p);
    p->add_option("--clicks", clicks, "click log CSV for precision/recall");
    p->add_option("--tolerance", o.click_tolerance, "click match tolerance (s)");

    auto* m = app.add_subcommand("metrics", "Delivery metrics (TDT/TDI) per window");
    m->add_option("trace", trace)->required();
    add_partition_flags(m);
    m->add_option("--window", window, "restrict to one window id");
    m->add_option("--percentile", o.percentile, "delivery percentile");
    m->add_option("--sweep", sweep, "extra percentiles for a TDT sweep")->delimiter(',');

    auto* w = app.add_subcommand("waterfall", "Render a window's download waterfall");
    w->add_option("trace", trace)->required();
    add_partition_flags(w);
    w->add_option("--window", wf_window, "window id");
    w->add_option("--render", render, "svg, ascii, or json");
    w->add_option("--critical", critical_file, "file of critical domains, one per line");
    w->add_option("--out", out_path, "write rendering to a file instead of stdout");

    auto* c = app.add_subcommand("cpa", "Critical path analysis over an experiment manifest");
    c->add_option("manifest", manifest_path)->required();
    add_partition_flags(c);
    c->add_option("--percentile", o.percentile, "delivery percentile");
    c->add_option("--significance", o.significance, "per-run p-value threshold");
    c->add_option("--throttle", o.throttle_rate, "shaping rate (bits/s)");
    c->add_option("--target-window", o.target_window, "window ordinal under test");
    c->add_option("--jobs", o.jobs, "parallel trace analyses");
    c->add_option("--app-domain", o.app_domains, "app-owned domain suffix (repeatable)");

    auto* s = app.add_subcommand("simulate", "Generate a seeded experiment directory");
    s->add_option("scenario", scenario_path)->required();
    s->add_option("--runs", o.runs, "runs per condition");
    auto* seed_opt = s->add_option("--seed", seed, "override the scenario seed");
    s->add_option("--out", out_dir, "output directory");
    s->add_option("--throttle", o.throttle_rate, "shaping rate (bits/s)");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      int rc = app.exit(e);
      return rc == 0 ? 0 : 2;
    }

    if (p->parsed())
      return cmd_partition(o, trace,
                           p->count("--clicks") ? std::optional(clicks) : std::nullopt);
    if (m->parsed()) return cmd_metrics(o, trace, window, sweep);
    if (w->parsed())
      return cmd_waterfall(o, trace, wf_window, render,
                           w->count("--critical") ? std::optional(critical_file) : std::nullopt,
                           w->count("--out") ? std::optional(out_path) : std::nullopt);
    if (c->parsed()) return cmd_cpa(o, manifest_path, c);
    if (s->parsed())
      return cmd_simulate(o, scenario_path, o.runs, seed, seed_opt->count() > 0, out_dir);
    return 2;
  } catch (const mcpa::Error& e) {
    std::cerr << "error [" << mcpa::to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == mcpa::ErrorCode::Internal ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
