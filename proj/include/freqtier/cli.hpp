#pragma once

// Command-line front end. Everything lives here so tests can drive the same
// entry point as the binary: run_cli(args, out, err) returns the exit code.
//
//   gen      write a synthetic trace file
//   run      one policy over a trace file or an inline trace spec
//   compare  table over saved reports, or run several policies side by side
//   inspect  frequency CDF of a report, or header and page range of a trace

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "freqtier/report.hpp"
#include "freqtier/simulate.hpp"
#include "freqtier/trace.hpp"

namespace freqtier::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TraceFlags {
  std::string dist = "zipf";
  double alpha = 1.0;
  double hot_fraction = 0.1;
  double hot_share = 0.9;
  std::string inner = "zipf";
  std::optional<std::uint64_t> shift_at;  // unset: half way
  std::uint64_t pages = 0;
  std::uint64_t accesses = 0;
};

struct RunFlags {
  std::string policy = "freqtier";
  std::string trace_path;
  TraceFlags trace;
  std::optional<std::uint64_t> trace_seed;  // unset: --seed

  std::string ratio;
  std::optional<double> local_fraction;
  std::optional<std::uint64_t> local_pages;
  std::optional<std::uint64_t> promo_wmark;
  std::optional<std::uint64_t> demote_wmark;

  std::string preset = "hardware";
  std::optional<std::uint32_t> hot_threshold;
  std::optional<std::uint64_t> batch_size;
  std::string sampling_probs;
  std::optional<std::uint64_t> window;
  std::optional<double> stability_delta;
  std::optional<std::uint64_t> stable_windows;
  std::optional<std::uint64_t> aging_interval;
  std::optional<double> hot_set_tolerance;
  std::optional<std::uint64_t> max_scan_pages;
  bool fixed_threshold = false;
  bool record_decisions = false;

  std::optional<std::uint64_t> counters;
  unsigned counter_bits = 4;
  unsigned hashes = 3;
  std::string layout = "plain";
  double fp_rate = 1e-3;
  std::optional<std::uint64_t> sketch_items;
  std::optional<std::uint64_t> hash_seed;

  std::string latency = "cxl1";
  std::optional<double> local_ns;
  std::optional<double> cxl_extra_ns;
  std::optional<double> cxl_bandwidth;
  std::optional<double> page_copy_ns;

  std::optional<std::uint64_t> scan_window;
  std::optional<std::uint64_t> scan_period;
  std::optional<std::uint64_t> hot_latency;
  std::optional<std::uint64_t> lru_batch;
  bool require_active = false;

  std::uint64_t seed = 1;
  std::string out_path;
  std::string format = "json";
};

// ---------------------------------------------------------------------------
// Option wiring

inline void add_trace_options(CLI::App& app, TraceFlags& f) {
  app.add_option("--dist", f.dist, "zipf | uniform | hotset | phase-shift")
      ->check(CLI::IsMember({"zipf", "uniform", "hotset", "phase-shift"}));
  app.add_option("--alpha", f.alpha, "zipf exponent");
  app.add_option("--hot-fraction", f.hot_fraction, "hotset: fraction of pages that are hot");
  app.add_option("--hot-share", f.hot_share, "hotset: share of accesses to hot pages");
  app.add_option("--inner", f.inner, "phase-shift: distribution inside each half")
      ->check(CLI::IsMember({"zipf", "uniform", "hotset"}));
  app.add_option("--shift-at", f.shift_at, "phase-shift: access index of the shift");
  app.add_option("--pages", f.pages, "number of pages");
  app.add_option("--accesses", f.accesses, "number of accesses");
}

inline void add_run_options(CLI::App& app, RunFlags& f) {
  app.add_option("--trace", f.trace_path, "trace file (otherwise generated from --dist etc.)");
  add_trace_options(app, f.trace);
  app.add_option("--trace-seed", f.trace_seed, "seed for an inline trace (default --seed)");

  app.add_option("--ratio", f.ratio, "local:cxl capacity as 1:R");
  app.add_option("--local-fraction", f.local_fraction, "local capacity as fraction of pages");
  app.add_option("--local-pages", f.local_pages, "local capacity in pages");
  app.add_option("--promo-wmark", f.promo_wmark, "free pages that trigger demotion");
  app.add_option("--demote-wmark", f.demote_wmark, "free pages that stop demotion");

  app.add_option("--preset", f.preset, "hardware | desk")->check(CLI::IsMember({"hardware", "desk"}));
  app.add_option("--hot-threshold", f.hot_threshold, "initial hot threshold");
  app.add_option("--batch-size", f.batch_size, "samples per batch");
  app.add_option("--sampling-probs", f.sampling_probs, "descending list, e.g. 1e-3,1e-4,1e-5");
  app.add_option("--window", f.window, "accesses per window");
  app.add_option("--stability-delta", f.stability_delta, "half width of the stability band");
  app.add_option("--stable-windows", f.stable_windows, "windows in the stability test");
  app.add_option("--aging-interval", f.aging_interval, "batches between agings");
  app.add_option("--hot-set-tolerance", f.hot_set_tolerance, "band around local capacity");
  app.add_option("--max-scan-pages", f.max_scan_pages, "pages per demotion trigger");
  app.add_flag("--fixed-threshold", f.fixed_threshold, "never adapt the hot threshold");
  app.add_flag("--record-decisions", f.record_decisions, "log every promote/demote decision");

  app.add_option("--counters", f.counters, "sketch counters (power of two)");
  app.add_option("--counter-bits", f.counter_bits, "bits per counter");
  app.add_option("--hashes", f.hashes, "hash functions");
  app.add_option("--layout", f.layout, "plain | blocked")->check(CLI::IsMember({"plain", "blocked"}));
  app.add_option("--fp-rate", f.fp_rate, "false positive target for sizing");
  app.add_option("--sketch-items", f.sketch_items, "items to size for (default local pages)");
  app.add_option("--hash-seed", f.hash_seed, "sketch hash seed");

  app.add_option("--latency", f.latency, "cxl1 | cxl2")->check(CLI::IsMember({"cxl1", "cxl2"}));
  app.add_option("--local-ns", f.local_ns, "local access latency");
  app.add_option("--cxl-extra-ns", f.cxl_extra_ns, "extra latency of a cxl access");
  app.add_option("--cxl-bandwidth", f.cxl_bandwidth, "cxl bandwidth as fraction of local");
  app.add_option("--page-copy-ns", f.page_copy_ns, "cost of one page migration");

  app.add_option("--scan-window", f.scan_window, "recency: pages unmapped per scan");
  app.add_option("--scan-period", f.scan_period, "recency: accesses between scans");
  app.add_option("--hot-latency", f.hot_latency, "recency: max unmap-to-fault ticks to promote");
  app.add_option("--lru-batch", f.lru_batch, "recency: pages demoted per trigger");
  app.add_flag("--require-active", f.require_active, "recency: promote only re-accessed pages");

  app.add_option("--seed", f.seed, "run seed");
}

// ---------------------------------------------------------------------------
// Resolution

inline BaseDistribution base_distribution(const std::string& name, const TraceFlags& f) {
  if (name == "zipf") return Zipf{f.alpha};
  if (name == "uniform") return Uniform{};
  if (name == "hotset") return Hotset{f.hot_fraction, f.hot_share};
  throw UsageError("--dist: unknown distribution '" + name + "'");
}

inline TraceSpec trace_spec(const TraceFlags& f, std::uint64_t seed) {
  if (f.pages == 0) throw UsageError("--pages: must be at least 1");
  TraceSpec spec;
  spec.n_pages = f.pages;
  spec.n_accesses = f.accesses;
  spec.seed = seed;
  if (f.dist == "phase-shift")
    spec.distribution = PhaseShift{base_distribution(f.inner, f), f.shift_at.value_or(f.accesses / 2)};
  else
    std::visit([&](auto d) { spec.distribution = d; }, base_distribution(f.dist, f));
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    std::string flag = "--dist";
    if (what.find("alpha") != std::string::npos) flag = "--alpha";
    else if (what.find("hot_fraction") != std::string::npos) flag = "--hot-fraction";
    else if (what.find("hot_share") != std::string::npos) flag = "--hot-share";
    else if (what.find("shift_at") != std::string::npos) flag = "--shift-at";
    else if (what.find("pages") != std::string::npos) flag = "--pages";
    throw UsageError(flag + ": " + what);
  }
  return spec;
}

inline ordered_json trace_spec_echo(const TraceFlags& f, const TraceSpec& spec) {
  ordered_json j;
  j["dist"] = f.dist;
  const auto base = [&](ordered_json& o, const BaseDistribution& d) {
    if (const auto* z = std::get_if<Zipf>(&d)) o["alpha"] = z->alpha;
    if (const auto* h = std::get_if<Hotset>(&d)) {
      o["hot_fraction"] = h->hot_fraction;
      o["hot_share"] = h->hot_share;
    }
  };
  if (const auto* s = std::get_if<PhaseShift>(&spec.distribution)) {
    j["inner"] = f.inner;
    base(j, s->inner);
    j["shift_at"] = s->shift_at;
  } else {
    std::visit(
        [&](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (!std::is_same_v<D, PhaseShift>) base(j, BaseDistribution{d});
        },
        spec.distribution);
  }
  j["pages"] = spec.n_pages;
  j["accesses"] = spec.n_accesses;
  j["seed"] = spec.seed;
  return j;
}

/// Returns R from "1:R".
inline std::uint64_t parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  std::uint64_t r = 0;
  if (colon == std::string::npos || text.substr(0, colon) != "1")
    throw UsageError("--ratio: expected 1:R, got '" + text + "'");
  const std::string rest = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), r);
  if (ec != std::errc() || ptr != rest.data() + rest.size() || r == 0)
    throw UsageError("--ratio: expected 1:R with R >= 1, got '" + text + "'");
  return r;
}

inline std::vector<double> parse_probs(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--sampling-probs: cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--sampling-probs: empty list");
  return out;
}

inline std::uint64_t resolve_local_pages(const RunFlags& f, std::uint64_t n_pages) {
  const int given = !f.ratio.empty() + f.local_fraction.has_value() + f.local_pages.has_value();
  if (given != 1)
    throw UsageError("exactly one of --ratio, --local-fraction, --local-pages is required");
  std::uint64_t local = 0;
  if (!f.ratio.empty()) {
    local = n_pages / (parse_ratio(f.ratio) + 1);
  } else if (f.local_fraction) {
    if (!(*f.local_fraction > 0.0 && *f.local_fraction <= 1.0))
      throw UsageError("--local-fraction: must lie in (0, 1]");
    local = static_cast<std::uint64_t>(*f.local_fraction * static_cast<double>(n_pages));
  } else {
    local = *f.local_pages;
  }
  if (local < 1) throw UsageError("resolved local capacity is below one page");
  return local;
}

inline SimConfig sim_config(const RunFlags& f, std::uint64_t n_pages) {
  SimConfig c;
  try {
    c.policy = parse_policy(f.policy);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--policy: ") + e.what());
  }
  c.seed = f.seed;
  c.local_pages = resolve_local_pages(f, n_pages);
  if (f.local_pages && *f.local_pages > n_pages)
    throw UsageError("--local-pages: exceeds the trace's page count");

  if (f.promo_wmark || f.demote_wmark) {
    Watermarks w = Watermarks::defaults_for(c.local_pages);
    if (f.promo_wmark) w.promo_wmark_pages = *f.promo_wmark;
    if (f.demote_wmark) w.demote_wmark_pages = *f.demote_wmark;
    try {
      w.validate(c.local_pages);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--promo-wmark/--demote-wmark: ") + e.what());
    }
    c.watermarks = w;
  }

  PolicyConfig& p = c.policy_config;
  if (f.preset == "desk") p = PolicyConfig::desk_scale();
  if (f.hot_threshold) p.hot_threshold_init = *f.hot_threshold;
  if (f.batch_size) p.batch_size = *f.batch_size;
  if (!f.sampling_probs.empty()) p.sampling_probs = parse_probs(f.sampling_probs);
  if (f.window) p.window_accesses = *f.window;
  if (f.stability_delta) p.stability_delta = *f.stability_delta;
  if (f.stable_windows) p.stable_windows = *f.stable_windows;
  if (f.aging_interval) p.aging_interval_batches = *f.aging_interval;
  if (f.hot_set_tolerance) p.hot_set_tolerance = *f.hot_set_tolerance;
  if (f.max_scan_pages) p.max_scan_pages_per_trigger = *f.max_scan_pages;
  p.adaptive_threshold = !f.fixed_threshold;
  p.record_decisions = f.record_decisions;

  c.sketch.num_counters = f.counters;
  c.sketch.counter_bits = f.counter_bits;
  c.sketch.num_hashes = f.hashes;
  c.sketch.layout = parse_layout(f.layout);
  c.sketch.fp_rate = f.fp_rate;
  c.sketch.n_items = f.sketch_items;
  c.sketch.hash_seed = f.hash_seed;

  c.latency_preset = f.latency;
  c.latency = f.latency == "cxl2" ? LatencyModel::cxl2() : LatencyModel::cxl1();
  if (f.local_ns) c.latency.local_latency_ns = *f.local_ns;
  if (f.cxl_extra_ns) c.latency.cxl_extra_ns = *f.cxl_extra_ns;
  if (f.cxl_bandwidth) c.latency.cxl_bandwidth_fraction = *f.cxl_bandwidth;
  if (f.page_copy_ns) c.latency.page_copy_ns = *f.page_copy_ns;

  if (f.preset == "desk") c.recency = RecencyConfig::desk_scale(p.window_accesses);
  if (f.scan_window) c.recency.scan_window_pages = *f.scan_window;
  if (f.scan_period) c.recency.scan_period_accesses = *f.scan_period;
  if (f.hot_latency) c.recency.hot_latency_ticks = *f.hot_latency;
  if (f.lru_batch) c.recency.lru_demote_batch = *f.lru_batch;
  c.recency.require_active = f.require_active;

  // Surface parameter errors as usage errors before any work is done.
  try {
    c.latency.validate();
    if (c.sketch.counter_bits < 2 || c.sketch.counter_bits > 8)
      throw std::invalid_argument("--counter-bits must lie in [2, 8]");
    p.validate((1u << c.sketch.counter_bits) - 1);
    if (c.policy == PolicyKind::FreqTier) (void)resolved_sketch(c);
    if (c.policy == PolicyKind::Recency)
      c.recency.resolved(n_pages, c.local_pages, p.window_accesses).validate(n_pages);
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

struct LoadedTrace {
  Trace trace;
  ordered_json source;
};

inline LoadedTrace load_trace(const RunFlags& f) {
  LoadedTrace t;
  if (!f.trace_path.empty()) {
    t.trace = read_trace(f.trace_path);
    t.source = {{"path", f.trace_path}};
  } else {
    if (f.trace.pages == 0) throw UsageError("either --trace or --pages/--accesses is required");
    const TraceSpec spec = trace_spec(f.trace, f.trace_seed.value_or(f.seed));
    t.trace = generate(spec);
    t.source = {{"spec", trace_spec_echo(f.trace, spec)}};
  }
  return t;
}

inline SimReport run_one(const LoadedTrace& t, const SimConfig& c, const RunFlags& f) {
  SimReport r = simulate(t.trace, c);
  r.config_echo["preset"] = f.preset;
  r.config_echo["trace"] = t.source;
  return r;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_gen(const TraceFlags& f, std::uint64_t seed, const std::string& out_path,
                   std::ostream& out) {
  if (out_path.empty()) throw UsageError("--out: required");
  const TraceSpec spec = trace_spec(f, seed);
  TraceGenerator gen(spec);
  TraceWriter writer(out_path, spec.n_pages, spec.n_accesses);
  Digest64 digest = header_digest(spec.n_pages, spec.n_accesses);
  while (!gen.done()) {
    const PageId p = gen.next();
    writer.push(p);
    digest.update(p);
  }
  writer.close();
  out << "n_pages " << spec.n_pages << '\n'
      << "n_accesses " << spec.n_accesses << '\n'
      << "digest " << digest_hex(digest.value()) << '\n';
  return kExitOk;
}

inline int cmd_run(const RunFlags& f, std::ostream& out) {
  const LoadedTrace t = load_trace(f);
  const SimConfig c = sim_config(f, t.trace.n_pages);
  const SimReport r = run_one(t, c, f);
  const ReportFormat format = parse_report_format(f.format);
  if (f.out_path.empty()) {
    out << (format == ReportFormat::Json ? to_json(r).dump(2) + "\n" : to_csv(r));
  } else {
    write_report(r, f.out_path, format);
  }
  return kExitOk;
}

inline void emit_table(const ComparisonTable& table, const std::string& json_path,
                       std::ostream& out) {
  out << format_table(table);
  if (!json_path.empty()) write_text(json_path, to_json(table).dump(2) + "\n");
}

inline int cmd_compare_reports(const std::vector<std::string>& paths, const std::string& json_path,
                               std::ostream& out) {
  std::vector<SimReport> reports;
  for (const auto& p : paths) reports.push_back(read_report(p));
  emit_table(compare(reports), json_path, out);
  return kExitOk;
}

/// One simulation per policy, each on its own thread and tier state.
inline int cmd_compare_live(const RunFlags& base, const std::string& policies,
                            const std::string& json_path, const std::string& out_dir,
                            std::ostream& out) {
  std::vector<std::string> names;
  std::stringstream in(policies);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) names.push_back(item);
  if (names.empty()) throw UsageError("--policies: empty list");

  const LoadedTrace t = load_trace(base);
  std::vector<RunFlags> flags(names.size(), base);
  std::vector<SimConfig> configs;
  for (std::size_t i = 0; i < names.size(); ++i) {
    flags[i].policy = names[i];
    configs.push_back(sim_config(flags[i], t.trace.n_pages));
  }
  std::vector<SimReport> reports(names.size());
  std::vector<std::exception_ptr> errors(names.size());
  std::vector<std::thread> lanes;
  for (std::size_t i = 0; i < names.size(); ++i) {
    lanes.emplace_back([&, i] {
      try {
        reports[i] = run_one(t, configs[i], flags[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& lane : lanes) lane.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (!out_dir.empty())
    for (const auto& r : reports)
      write_report(r, out_dir + "/" + r.policy + ".json", ReportFormat::Json);
  emit_table(compare(reports), json_path, out);
  return kExitOk;
}

inline int cmd_inspect_report(const std::string& path, std::ostream& out) {
  const SimReport r = read_report(path);
  if (!r.sketch) throw ReportIoError("report '" + path + "' has no frequency statistics");
  const FrequencyCdf cdf = frequency_cdf(*r.sketch);
  out << "policy " << r.policy << '\n' << "memory_bytes " << r.sketch->memory_bytes << '\n';
  out << "value  pages  cdf\n";
  for (std::size_t v = 0; v < cdf.cdf.size(); ++v) {
    const auto pages = v < r.sketch->observed_histogram.size() ? r.sketch->observed_histogram[v] : 0;
    out << v << "  " << pages << "  " << format_double(cdf.cdf[v]) << '\n';
  }
  out << "fraction_at_max " << format_double(cdf.fraction_at_max) << '\n';
  return kExitOk;
}

inline int cmd_inspect_trace(const std::string& path, std::optional<std::uint64_t> from,
                             std::optional<std::uint64_t> to, std::ostream& out) {
  const Trace t = read_trace(path);
  out << "n_pages " << t.n_pages << '\n'
      << "n_accesses " << t.n_accesses() << '\n'
      << "digest " << digest_hex(trace_digest(t)) << '\n';
  const std::uint64_t lo = std::min(from.value_or(0), t.n_accesses());
  const std::uint64_t hi = std::clamp(to.value_or(t.n_accesses()), lo, t.n_accesses());
  if (lo < hi) {
    const auto [mn, mx] = std::minmax_element(t.pages.begin() + static_cast<std::ptrdiff_t>(lo),
                                              t.pages.begin() + static_cast<std::ptrdiff_t>(hi));
    out << "records [" << lo << ", " << hi << ") pages [" << *mn << ", " << *mx << "]\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Config file: flat key=value lines named after long flags. They are spliced
// in ahead of the command line, and since every option keeps its last value,
// flags given on the command line win.

inline std::vector<std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("--config: cannot open '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  int line_no = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("--config: line " + std::to_string(line_no) + " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config")
      throw UsageError("--config: bad key on line " + std::to_string(line_no));
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

inline std::vector<std::string> splice_config(std::vector<std::string> args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string path;
    std::size_t drop = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      drop = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      drop = 1;
    } else {
      continue;
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
               args.begin() + static_cast<std::ptrdiff_t>(i + drop));
    const auto extra = read_config_file(path);
    args.insert(args.begin() + 1, extra.begin(), extra.end());
    break;
  }
  return args;
}

// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-tier memory placement simulator", "freqtier"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  TraceFlags gen_flags;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "write a synthetic trace file");
  add_trace_options(*gen, gen_flags);
  gen->add_option("--seed", gen_seed, "trace seed");
  gen->add_option("--out", gen_out, "output path");
  gen->add_option("--config", "key=value file");

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "simulate one policy");
  run->add_option("--policy", run_flags.policy, "freqtier | exact-lfu | recency | ideal");
  add_run_options(*run, run_flags);
  run->add_option("--out", run_flags.out_path, "report path (default stdout)");
  run->add_option("--format", run_flags.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  run->add_option("--config", "key=value file");

  RunFlags cmp_flags;
  std::vector<std::string> report_paths;
  std::string cmp_json, cmp_policies, cmp_out_dir;
  auto* cmp = app.add_subcommand("compare", "compare saved reports or run policies side by side");
  cmp->add_option("reports", report_paths, "report files");
  cmp->add_option("--json", cmp_json, "also write the table as JSON");
  cmp->add_option("--policies", cmp_policies, "run these policies instead, e.g. freqtier,recency");
  cmp->add_option("--out-dir", cmp_out_dir, "with --policies: write each report here");
  add_run_options(*cmp, cmp_flags);
  cmp->add_option("--config", "key=value file");

  std::string inspect_report, inspect_trace;
  std::optional<std::uint64_t> inspect_from, inspect_to;
  auto* inspect = app.add_subcommand("inspect", "frequency CDF of a report, or a trace summary");
  inspect->add_option("report", inspect_report, "report file");
  inspect->add_option("--trace", inspect_trace, "trace file");
  inspect->add_option("--from", inspect_from, "first record of the range to summarize");
  inspect->add_option("--to", inspect_to, "end of the range to summarize");

  try {
    args = splice_config(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_flags, gen_seed, gen_out, out);
    if (run->parsed()) return cmd_run(run_flags, out);
    if (cmp->parsed()) {
      if (!cmp_policies.empty()) {
        if (!report_paths.empty()) throw UsageError("give report files or --policies, not both");
        return cmd_compare_live(cmp_flags, cmp_policies, cmp_json, cmp_out_dir, out);
      }
      if (report_paths.empty()) throw UsageError("compare: no reports given");
      return cmd_compare_reports(report_paths, cmp_json, out);
    }
    if (inspect->parsed()) {
      if (inspect_report.empty() == inspect_trace.empty())
        throw UsageError("inspect: give a report file or --trace");
      if (!inspect_trace.empty()) return cmd_inspect_trace(inspect_trace, inspect_from, inspect_to, out);
      return cmd_inspect_report(inspect_report, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TraceError& e) {
    err << "trace error: " << e.what() << '\n';
    return kExitData;
  } catch (const ComparisonError& e) {
    err << "comparison error: " << e.what() << '\n';
    return kExitData;
  } catch (const ReportIoError& e) {
    err << "report error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace freqtier::cli
