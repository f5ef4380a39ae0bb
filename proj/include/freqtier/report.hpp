#pragma once

// Simulation reports: JSON/CSV serialization, steady-state summaries,
// cross-policy comparison and the frequency CDF of observed pages.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqtier/memsim.hpp"
#include "freqtier/policy.hpp"

namespace freqtier {

using ordered_json = nlohmann::ordered_json;

struct TrafficTotals {
  std::uint64_t local_bytes = 0;
  std::uint64_t cxl_bytes = 0;
  std::uint64_t migration_bytes = 0;
  friend bool operator==(const TrafficTotals&, const TrafficTotals&) = default;
};

struct SketchStats {
  std::uint64_t memory_bytes = 0;
  std::uint32_t max_count = 15;
  std::vector<std::uint64_t> counter_histogram;   // over all counters
  std::vector<std::uint64_t> observed_histogram;  // over distinct sampled pages
  double fraction_at_max = 0.0;
  friend bool operator==(const SketchStats&, const SketchStats&) = default;
};

inline SketchStats make_sketch_stats(std::uint64_t memory_bytes, std::uint32_t max_count,
                                     std::vector<std::uint64_t> counter_histogram,
                                     std::vector<std::uint64_t> observed_histogram) {
  SketchStats s;
  s.memory_bytes = memory_bytes;
  s.max_count = max_count;
  s.counter_histogram = std::move(counter_histogram);
  s.observed_histogram = std::move(observed_histogram);
  std::uint64_t total = 0;
  for (const auto c : s.observed_histogram) total += c;
  s.fraction_at_max = total == 0 ? 0.0
                                 : static_cast<double>(s.observed_histogram.back()) /
                                       static_cast<double>(total);
  return s;
}

struct SimReport {
  std::string policy;
  ordered_json config_echo = ordered_json::object();
  std::uint64_t trace_digest = 0;
  std::uint64_t n_pages = 0;
  std::uint64_t n_accesses = 0;
  std::uint64_t local_pages = 0;

  double cumulative_hit_ratio = 0.0;
  std::uint64_t local_accesses = 0;
  std::uint64_t cxl_accesses = 0;
  std::uint64_t promoted_pages = 0;
  std::uint64_t demoted_pages = 0;
  TrafficTotals traffic;
  double estimated_time_ns = 0.0;
  std::uint32_t final_hot_threshold = 0;
  PolicyCounters counters;

  std::vector<WindowRecord> windows;
  std::vector<Transition> transitions;
  std::vector<Decision> decisions;
  std::optional<SketchStats> sketch;
  std::optional<std::uint64_t> metadata_bytes;

  std::vector<double> window_hit_ratios() const {
    std::vector<double> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(w.hit_ratio);
    return out;
  }
};

/// Fills the access, migration, traffic and time fields from a finished run.
inline void record_totals(SimReport& r, const TierState& state, const LatencyModel& model) {
  r.local_accesses = state.local_accesses();
  r.cxl_accesses = state.cxl_accesses();
  r.promoted_pages = state.promoted_pages();
  r.demoted_pages = state.demoted_pages();
  r.cumulative_hit_ratio = state.hit_ratio();
  r.traffic = {state.local_bytes(), state.cxl_bytes(), state.migration_bytes()};
  r.estimated_time_ns = estimate_time(state, model);
}

/// Hit ratio over the last `tail_fraction` of windows (at least one window).
inline double steady_state_hit_ratio(const SimReport& r, double tail_fraction = 0.25) {
  if (r.windows.empty()) return r.cumulative_hit_ratio;
  const auto n = r.windows.size();
  const auto tail = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))), 1, n);
  std::uint64_t local = 0, total = 0;
  for (std::size_t i = n - tail; i < n; ++i) {
    local += r.windows[i].local_accesses;
    total += r.windows[i].accesses;
  }
  return total == 0 ? 0.0 : static_cast<double>(local) / static_cast<double>(total);
}

/// Hit ratio over windows [first, last).
inline double hit_ratio_between(const SimReport& r, std::size_t first, std::size_t last) {
  std::uint64_t local = 0, total = 0;
  for (std::size_t i = first; i < std::min(last, r.windows.size()); ++i) {
    local += r.windows[i].local_accesses;
    total += r.windows[i].accesses;
  }
  return total == 0 ? 0.0 : static_cast<double>(local) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// JSON

inline std::string digest_hex(std::uint64_t digest) {
  char buf[19] = "0x";
  auto [end, ec] = std::to_chars(buf + 2, buf + sizeof buf, digest, 16);
  std::string s(buf + 2, end);
  return "0x" + std::string(16 - s.size(), '0') + s;
}

inline std::uint64_t parse_digest_hex(const std::string& text) {
  if (text.size() != 18 || text.rfind("0x", 0) != 0)
    throw std::invalid_argument("malformed trace digest '" + text + "'");
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data() + 2, text.data() + text.size(), v, 16);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("malformed trace digest '" + text + "'");
  return v;
}

inline MachineState parse_machine_state(const std::string& s) {
  if (s == "promoting") return MachineState::Promoting;
  if (s == "demoting") return MachineState::Demoting;
  if (s == "monitoring") return MachineState::Monitoring;
  throw std::invalid_argument("unknown machine state '" + s + "'");
}

inline ordered_json to_json(const SimReport& r) {
  ordered_json j;
  j["policy"] = r.policy;
  j["trace"] = {{"digest", digest_hex(r.trace_digest)},
                {"n_pages", r.n_pages},
                {"n_accesses", r.n_accesses}};
  j["local_pages"] = r.local_pages;
  j["config"] = r.config_echo;
  j["summary"] = {{"cumulative_hit_ratio", r.cumulative_hit_ratio},
                  {"local_accesses", r.local_accesses},
                  {"cxl_accesses", r.cxl_accesses},
                  {"promoted_pages", r.promoted_pages},
                  {"demoted_pages", r.demoted_pages},
                  {"final_hot_threshold", r.final_hot_threshold},
                  {"estimated_time_ns", r.estimated_time_ns}};
  j["traffic"] = {{"local_bytes", r.traffic.local_bytes},
                  {"cxl_bytes", r.traffic.cxl_bytes},
                  {"migration_bytes", r.traffic.migration_bytes}};
  j["counters"] = {{"samples", r.counters.samples},
                   {"batches", r.counters.batches},
                   {"agings", r.counters.agings},
                   {"tracker_updates", r.counters.tracker_updates},
                   {"uncoalesced_updates", r.counters.uncoalesced_updates},
                   {"scanned_pages", r.counters.scanned_pages},
                   {"skipped_capacity", r.counters.skipped_capacity}};
  if (r.sketch) {
    j["sketch"] = {{"memory_bytes", r.sketch->memory_bytes},
                   {"max_count", r.sketch->max_count},
                   {"counter_histogram", r.sketch->counter_histogram},
                   {"observed_histogram", r.sketch->observed_histogram},
                   {"fraction_at_max", r.sketch->fraction_at_max}};
  } else {
    j["sketch"] = nullptr;
  }
  j["metadata_bytes"] = r.metadata_bytes ? ordered_json(*r.metadata_bytes) : ordered_json();

  ordered_json windows = ordered_json::array();
  ordered_json levels = ordered_json::array();
  for (const auto& w : r.windows) {
    windows.push_back({{"index", w.index},
                       {"accesses", w.accesses},
                       {"local_accesses", w.local_accesses},
                       {"hit_ratio", w.hit_ratio},
                       {"promotions", w.promotions},
                       {"demotions", w.demotions},
                       {"samples", w.samples},
                       {"sampling_level", w.sampling_level},
                       {"machine_state", to_string(w.machine_state)},
                       {"hot_threshold", w.hot_threshold}});
    levels.push_back(w.sampling_level);
  }
  j["windows"] = std::move(windows);
  j["sampling_level_timeline"] = std::move(levels);

  ordered_json transitions = ordered_json::array();
  for (const auto& t : r.transitions)
    transitions.push_back({{"tick", t.tick},
                           {"from", to_string(t.from)},
                           {"to", to_string(t.to)},
                           {"reason", t.reason}});
  j["state_transitions"] = std::move(transitions);

  ordered_json decisions = ordered_json::array();
  for (const auto& d : r.decisions)
    decisions.push_back({{"tick", d.tick},
                         {"page", d.page},
                         {"kind", d.kind == Decision::Kind::Promote ? "promote" : "demote"},
                         {"frequency", d.frequency},
                         {"threshold", d.threshold}});
  j["decisions"] = std::move(decisions);
  return j;
}

inline SimReport report_from_json(const ordered_json& j) {
  SimReport r;
  r.policy = j.at("policy").get<std::string>();
  r.trace_digest = parse_digest_hex(j.at("trace").at("digest").get<std::string>());
  r.n_pages = j.at("trace").at("n_pages").get<std::uint64_t>();
  r.n_accesses = j.at("trace").at("n_accesses").get<std::uint64_t>();
  r.local_pages = j.at("local_pages").get<std::uint64_t>();
  r.config_echo = j.at("config");
  const auto& s = j.at("summary");
  r.cumulative_hit_ratio = s.at("cumulative_hit_ratio").get<double>();
  r.local_accesses = s.at("local_accesses").get<std::uint64_t>();
  r.cxl_accesses = s.at("cxl_accesses").get<std::uint64_t>();
  r.promoted_pages = s.at("promoted_pages").get<std::uint64_t>();
  r.demoted_pages = s.at("demoted_pages").get<std::uint64_t>();
  r.final_hot_threshold = s.at("final_hot_threshold").get<std::uint32_t>();
  r.estimated_time_ns = s.at("estimated_time_ns").get<double>();
  const auto& t = j.at("traffic");
  r.traffic = {t.at("local_bytes").get<std::uint64_t>(), t.at("cxl_bytes").get<std::uint64_t>(),
               t.at("migration_bytes").get<std::uint64_t>()};
  const auto& c = j.at("counters");
  r.counters.samples = c.at("samples").get<std::uint64_t>();
  r.counters.batches = c.at("batches").get<std::uint64_t>();
  r.counters.agings = c.at("agings").get<std::uint64_t>();
  r.counters.tracker_updates = c.at("tracker_updates").get<std::uint64_t>();
  r.counters.uncoalesced_updates = c.at("uncoalesced_updates").get<std::uint64_t>();
  r.counters.scanned_pages = c.at("scanned_pages").get<std::uint64_t>();
  r.counters.skipped_capacity = c.at("skipped_capacity").get<std::uint64_t>();
  if (!j.at("sketch").is_null()) {
    const auto& k = j.at("sketch");
    SketchStats st;
    st.memory_bytes = k.at("memory_bytes").get<std::uint64_t>();
    st.max_count = k.at("max_count").get<std::uint32_t>();
    st.counter_histogram = k.at("counter_histogram").get<std::vector<std::uint64_t>>();
    st.observed_histogram = k.at("observed_histogram").get<std::vector<std::uint64_t>>();
    st.fraction_at_max = k.at("fraction_at_max").get<double>();
    r.sketch = std::move(st);
  }
  if (!j.at("metadata_bytes").is_null()) r.metadata_bytes = j.at("metadata_bytes").get<std::uint64_t>();
  for (const auto& w : j.at("windows")) {
    WindowRecord rec;
    rec.index = w.at("index").get<std::uint64_t>();
    rec.accesses = w.at("accesses").get<std::uint64_t>();
    rec.local_accesses = w.at("local_accesses").get<std::uint64_t>();
    rec.hit_ratio = w.at("hit_ratio").get<double>();
    rec.promotions = w.at("promotions").get<std::uint64_t>();
    rec.demotions = w.at("demotions").get<std::uint64_t>();
    rec.samples = w.at("samples").get<std::uint64_t>();
    rec.sampling_level = w.at("sampling_level").get<std::uint32_t>();
    rec.machine_state = parse_machine_state(w.at("machine_state").get<std::string>());
    rec.hot_threshold = w.at("hot_threshold").get<std::uint32_t>();
    r.windows.push_back(rec);
  }
  for (const auto& tr : j.at("state_transitions"))
    r.transitions.push_back({tr.at("tick").get<std::uint64_t>(),
                             parse_machine_state(tr.at("from").get<std::string>()),
                             parse_machine_state(tr.at("to").get<std::string>()),
                             tr.at("reason").get<std::string>()});
  for (const auto& d : j.at("decisions")) {
    Decision dec;
    dec.tick = d.at("tick").get<std::uint64_t>();
    dec.page = d.at("page").get<PageId>();
    dec.kind = d.at("kind").get<std::string>() == "promote" ? Decision::Kind::Promote
                                                             : Decision::Kind::Demote;
    dec.frequency = d.at("frequency").get<std::uint32_t>();
    dec.threshold = d.at("threshold").get<std::uint32_t>();
    r.decisions.push_back(dec);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Files

enum class ReportFormat { Json, Csv };

inline ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  throw std::invalid_argument("unknown report format '" + name + "'");
}

inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string to_csv(const SimReport& r) {
  std::string out = "window_index,hit_ratio,promotions,demotions,sampling_level,machine_state\n";
  for (const auto& w : r.windows) {
    out += std::to_string(w.index) + ',' + format_double(w.hit_ratio) + ',' +
           std::to_string(w.promotions) + ',' + std::to_string(w.demotions) + ',' +
           std::to_string(w.sampling_level) + ',' + std::string(to_string(w.machine_state)) + '\n';
  }
  return out;
}

class ReportIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportIoError("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw ReportIoError("write failed for '" + path + "'");
}

inline void write_report(const SimReport& r, const std::string& path, ReportFormat format) {
  write_text(path, format == ReportFormat::Json ? to_json(r).dump(2) + "\n" : to_csv(r));
}

inline SimReport read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportIoError("cannot open report '" + path + "'");
  try {
    return report_from_json(ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ReportIoError("malformed report '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Comparison

class ComparisonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ComparisonRow {
  std::string policy;
  double cumulative_hit_ratio = 0.0;
  std::uint64_t migration_bytes = 0;
  double estimated_time_ns = 0.0;
  // Relative to the best row: highest hit ratio, fewest migration bytes,
  // shortest estimated time. Infinity when the best is zero and this is not.
  double hit_ratio_pct = 100.0;
  double migration_pct = 100.0;
  double time_pct = 100.0;
};

struct ComparisonTable {
  std::uint64_t trace_digest = 0;
  std::vector<ComparisonRow> rows;
};

inline ComparisonTable compare(const std::vector<SimReport>& reports) {
  if (reports.empty()) throw ComparisonError("nothing to compare");
  ComparisonTable table;
  table.trace_digest = reports.front().trace_digest;
  for (const auto& r : reports) {
    if (r.trace_digest != table.trace_digest)
      throw ComparisonError("reports come from different traces (" + digest_hex(table.trace_digest) +
                            " vs " + digest_hex(r.trace_digest) + ")");
    table.rows.push_back({r.policy, r.cumulative_hit_ratio, r.traffic.migration_bytes,
                          r.estimated_time_ns});
  }
  double best_hit = 0.0, best_time = std::numeric_limits<double>::infinity();
  std::uint64_t best_mig = std::numeric_limits<std::uint64_t>::max();
  for (const auto& row : table.rows) {
    best_hit = std::max(best_hit, row.cumulative_hit_ratio);
    best_mig = std::min(best_mig, row.migration_bytes);
    best_time = std::min(best_time, row.estimated_time_ns);
  }
  const auto pct = [](double value, double best) {
    if (value == best) return 100.0;
    if (best == 0.0) return std::numeric_limits<double>::infinity();
    return 100.0 * value / best;
  };
  for (auto& row : table.rows) {
    row.hit_ratio_pct = pct(row.cumulative_hit_ratio, best_hit);
    row.migration_pct = pct(static_cast<double>(row.migration_bytes), static_cast<double>(best_mig));
    row.time_pct = pct(row.estimated_time_ns, best_time);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.policy < b.policy; });
  return table;
}

inline ordered_json to_json(const ComparisonTable& table) {
  const auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(); };
  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows)
    rows.push_back({{"policy", row.policy},
                    {"cumulative_hit_ratio", row.cumulative_hit_ratio},
                    {"migration_bytes", row.migration_bytes},
                    {"estimated_time_ns", row.estimated_time_ns},
                    {"hit_ratio_pct", num(row.hit_ratio_pct)},
                    {"migration_pct", num(row.migration_pct)},
                    {"time_pct", num(row.time_pct)}});
  return {{"trace_digest", digest_hex(table.trace_digest)}, {"rows", std::move(rows)}};
}

/// Aligned plain-text rendering of a comparison table.
inline std::string format_table(const ComparisonTable& table) {
  std::size_t name_width = 6;
  for (const auto& row : table.rows) name_width = std::max(name_width, row.policy.size());
  std::ostringstream out;
  const auto pad = [](std::string s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };
  const auto lpad = [](std::string s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  const auto fixed = [](double v, int digits) {
    if (!std::isfinite(v)) return std::string("inf");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
  };
  out << "trace " << digest_hex(table.trace_digest) << '\n';
  out << pad("policy", name_width) << "  " << lpad("hit_ratio", 9) << "  " << lpad("hit%", 7)
      << "  " << lpad("migration_bytes", 15) << "  " << lpad("mig%", 9) << "  "
      << lpad("est_time_ns", 16) << "  " << lpad("time%", 7) << '\n';
  for (const auto& row : table.rows) {
    out << pad(row.policy, name_width) << "  " << lpad(fixed(row.cumulative_hit_ratio, 4), 9)
        << "  " << lpad(fixed(row.hit_ratio_pct, 1), 7) << "  "
        << lpad(std::to_string(row.migration_bytes), 15) << "  "
        << lpad(fixed(row.migration_pct, 1), 9) << "  " << lpad(fixed(row.estimated_time_ns, 0), 16)
        << "  " << lpad(fixed(row.time_pct, 1), 7) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Frequency distribution

struct FrequencyCdf {
  std::vector<double> cdf;  // cdf[v] = fraction of observed pages with frequency <= v
  double fraction_at_max = 0.0;
};

inline FrequencyCdf frequency_cdf(const SketchStats& stats) {
  FrequencyCdf out;
  const auto& hist = stats.observed_histogram;
  out.cdf.assign(stats.max_count + 1, 1.0);
  std::uint64_t total = 0;
  for (const auto c : hist) total += c;
  if (total == 0) return out;
  std::uint64_t running = 0;
  for (std::size_t v = 0; v < out.cdf.size(); ++v) {
    running += v < hist.size() ? hist[v] : 0;
    out.cdf[v] = static_cast<double>(running) / static_cast<double>(total);
  }
  out.fraction_at_max = hist.size() > stats.max_count
                            ? static_cast<double>(hist[stats.max_count]) / static_cast<double>(total)
                            : 0.0;
  return out;
}

}  // namespace freqtier
