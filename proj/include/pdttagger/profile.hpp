#pragma once

// Measurement records, per-region aggregates, thread plans, and the result /
// viz / plan file formats.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdttagger/error.hpp"
#include "pdttagger/pragma_scan.hpp"
#include "pdttagger/text.hpp"

namespace pdttagger {

using CounterMap = std::map<std::string, std::uint64_t>;

/// Region id used for visits whose id is not in the manifest.
inline constexpr RegionId kUnknownRegion = -1;

struct VisitRecord {
  RegionId region_id = 0;
  int thread_count_used = 1;
  std::int64_t wall_time_ns = 0;
  CounterMap counters;

  bool operator==(const VisitRecord&) const = default;
};

struct RegionProfile {
  RegionId region_id = 0;
  int thread_count = 1;
  std::uint64_t visits = 0;
  std::int64_t total_ns = 0;
  std::int64_t min_ns = 0;
  std::int64_t max_ns = 0;
  CounterMap counter_totals;

  double mean_seconds() const {
    return visits == 0 ? 0.0 : static_cast<double>(total_ns) / static_cast<double>(visits) * 1e-9;
  }
  double total_seconds() const { return static_cast<double>(total_ns) * 1e-9; }

  void fold(const VisitRecord& v) {
    if (visits == 0) {
      min_ns = max_ns = v.wall_time_ns;
    } else {
      min_ns = std::min(min_ns, v.wall_time_ns);
      max_ns = std::max(max_ns, v.wall_time_ns);
    }
    ++visits;
    total_ns += v.wall_time_ns;
    for (const auto& [event, count] : v.counters) counter_totals[event] += count;
  }

  void merge(const RegionProfile& other) {
    if (other.visits == 0) return;
    if (visits == 0) {
      min_ns = other.min_ns;
      max_ns = other.max_ns;
    } else {
      min_ns = std::min(min_ns, other.min_ns);
      max_ns = std::max(max_ns, other.max_ns);
    }
    visits += other.visits;
    total_ns += other.total_ns;
    for (const auto& [event, count] : other.counter_totals) counter_totals[event] += count;
  }

  bool operator==(const RegionProfile&) const = default;
};

struct ThreadPlan {
  int default_threads = 1;
  std::map<RegionId, int> overrides;

  int threads_for(RegionId id) const {
    const auto it = overrides.find(id);
    return it == overrides.end() ? default_threads : it->second;
  }

  bool operator==(const ThreadPlan&) const = default;
};

struct RunResult {
  std::string run_id = "run";
  int default_threads = 1;
  std::map<std::pair<RegionId, int>, RegionProfile> profiles;  // (region, threads)
  std::vector<RegionId> unbalanced_regions;

  bool operator==(const RunResult&) const = default;
};

// ---------------------------------------------------------------------------
// Plan file: "pdtplan v1 <default>" then "<region_id> <threads>" lines.

inline std::string emit_plan(const ThreadPlan& plan) {
  std::ostringstream os;
  os << "pdtplan v1 " << plan.default_threads << '\n';
  for (const auto& [id, n] : plan.overrides) os << id << ' ' << n << '\n';
  return os.str();
}

inline ThreadPlan parse_plan(std::string_view plan_text) {
  auto fail = [](std::size_t line, const std::string& what) {
    return Error(ErrorCode::PlanSyntax, "line " + std::to_string(line) + ": " + what);
  };
  const auto lines = text::split_lines(plan_text);
  if (lines.empty()) throw fail(1, "missing header");
  const auto header = text::split_ws(lines[0].body);
  if (header.size() != 3 || header[0] != "pdtplan" || header[1] != "v1") throw fail(1, "bad header");
  ThreadPlan plan;
  const auto def = text::parse_int<int>(header[2]);
  if (!def || *def < 1) throw fail(1, "default thread count must be a positive integer");
  plan.default_threads = *def;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = text::split_ws(lines[n].body);
    if (f.empty()) continue;
    if (f.size() != 2) throw fail(n + 1, "expected '<region_id> <threads>'");
    const auto id = text::parse_int<RegionId>(f[0]);
    const auto threads = text::parse_int<int>(f[1]);
    if (!id || *id < 0) throw fail(n + 1, "bad region id");
    if (!threads || *threads < 1) throw fail(n + 1, "thread count must be a positive integer");
    if (!plan.overrides.emplace(*id, *threads).second) throw fail(n + 1, "duplicate region id");
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Result file.

inline std::string emit_result(const RunResult& result) {
  std::ostringstream os;
  os << "pdtresult v1 " << result.run_id << ' ' << result.default_threads << '\n';
  if (!result.unbalanced_regions.empty()) {
    os << "unbalanced";
    for (auto id : result.unbalanced_regions) os << ' ' << id;
    os << '\n';
  }
  for (const auto& [key, p] : result.profiles) {
    os << "region " << p.region_id << " threads " << p.thread_count << " visits " << p.visits << " total "
       << text::format_seconds(p.total_ns) << " mean " << text::format_fixed(p.mean_seconds(), 6) << " min "
       << text::format_seconds(p.min_ns) << " max " << text::format_seconds(p.max_ns) << '\n';
    for (const auto& [event, count] : p.counter_totals) os << "  counter " << event << ' ' << count << '\n';
  }
  return os.str();
}

inline RunResult parse_result(std::string_view result_text) {
  const auto lines = text::split_lines(result_text);
  if (lines.empty()) throw Error(ErrorCode::ResultSyntax, "line 1: missing header");
  const auto header = text::split_ws(lines[0].body);
  const auto def = header.size() == 4 ? text::parse_int<int>(header[3]) : std::nullopt;
  if (header.size() != 4 || header[0] != "pdtresult" || header[1] != "v1" || !def || *def < 0) {
    throw Error(ErrorCode::ResultSyntax, "line 1: bad header");
  }
  RunResult r;
  r.run_id = std::string(header[2]);
  r.default_threads = *def;

  std::size_t stanza = 0;
  RegionProfile* current = nullptr;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = text::split_ws(lines[n].body);
    if (f.empty()) continue;
    auto fail = [&](const std::string& what) {
      const std::string where =
          stanza > 0 ? "stanza " + std::to_string(stanza) + " (line " + std::to_string(n + 1) + ")"
                     : "line " + std::to_string(n + 1);
      return Error(ErrorCode::ResultSyntax, where + ": " + what);
    };
    if (f[0] == "unbalanced") {
      if (stanza > 0) throw fail("'unbalanced' must precede region stanzas");
      for (std::size_t k = 1; k < f.size(); ++k) {
        const auto id = text::parse_int<RegionId>(f[k]);
        if (!id) throw fail("bad region id");
        r.unbalanced_regions.push_back(*id);
      }
      continue;
    }
    if (f[0] == "counter") {
      if (!current) throw fail("counter line outside a region stanza");
      const auto count = f.size() == 3 ? text::parse_int<std::uint64_t>(f[2]) : std::nullopt;
      if (!count) throw fail("expected 'counter <event> <count>'");
      if (!current->counter_totals.emplace(std::string(f[1]), *count).second) throw fail("duplicate counter");
      continue;
    }
    if (f[0] != "region") throw fail("unexpected '" + std::string(f[0]) + "'");
    ++stanza;
    if (f.size() != 14) throw fail("truncated region line");
    static constexpr std::string_view keys[] = {"region", "threads", "visits", "total", "mean", "min", "max"};
    for (std::size_t k = 0; k < 7; ++k) {
      if (f[2 * k] != keys[k]) throw fail("expected '" + std::string(keys[k]) + "'");
    }
    RegionProfile p;
    const auto id = text::parse_int<RegionId>(f[1]);
    const auto threads = text::parse_int<int>(f[3]);
    const auto visits = text::parse_int<std::uint64_t>(f[5]);
    const auto total = text::parse_seconds(f[7]);
    const auto mean = text::parse_seconds(f[9]);
    const auto mn = text::parse_seconds(f[11]);
    const auto mx = text::parse_seconds(f[13]);
    if (!id || !threads || *threads < 0 || !visits || *visits < 1) throw fail("bad region/threads/visits");
    if (!total || !mean || !mn || !mx || *mn > *mx) throw fail("bad time fields");
    p.region_id = *id;
    p.thread_count = *threads;
    p.visits = *visits;
    p.total_ns = *total;
    p.min_ns = *mn;
    p.max_ns = *mx;
    const auto key = std::make_pair(p.region_id, p.thread_count);
    if (r.profiles.count(key)) throw fail("duplicate stanza for region/threads");
    current = &r.profiles.emplace(key, std::move(p)).first->second;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Viz XML.

struct VizOptions {
  bool include_counters = false;
  const std::vector<Region>* regions = nullptr;  // manifest entries for kind/file/line
};

inline std::string emit_viz(const RunResult& result, const VizOptions& opts = {}) {
  auto info = [&](RegionId id) -> const Region* {
    if (!opts.regions) return nullptr;
    for (const auto& r : *opts.regions) {
      if (r.id == id) return &r;
    }
    return nullptr;
  };
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<pdtviz version=\"1\" run=\"" << text::xml_escape(result.run_id) << "\" default_threads=\""
     << result.default_threads << "\">\n";
  for (const auto& [key, p] : result.profiles) {
    os << "  <region id=\"" << p.region_id << "\" threads=\"" << p.thread_count << "\"";
    if (const auto* r = info(p.region_id)) {
      os << " kind=\"" << to_string(r->kind) << "\" file=\"" << text::xml_escape(r->file) << "\" line=\""
         << r->pragma_line << "\" function=\"" << text::xml_escape(r->function) << "\"";
    }
    os << ">\n";
    os << "    <time visits=\"" << p.visits << "\" total=\"" << text::format_seconds(p.total_ns) << "\" mean=\""
       << text::format_fixed(p.mean_seconds(), 6) << "\" min=\"" << text::format_seconds(p.min_ns) << "\" max=\""
       << text::format_seconds(p.max_ns) << "\"/>\n";
    if (opts.include_counters) {
      for (const auto& [event, count] : p.counter_totals) {
        os << "    <counter name=\"" << text::xml_escape(event) << "\" value=\"" << count << "\"/>\n";
      }
    }
    os << "  </region>\n";
  }
  os << "</pdtviz>\n";
  return os.str();
}

}  // namespace pdttagger
