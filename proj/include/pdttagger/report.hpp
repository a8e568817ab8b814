#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "pdttagger/profile.hpp"
#include "pdttagger/text.hpp"

namespace pdttagger {

/// Human-readable table, one row per stanza, by total time descending.
inline std::string render_text_report(const RunResult& result) {
  std::vector<const RegionProfile*> rows;
  for (const auto& [key, p] : result.profiles) rows.push_back(&p);
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) {
    if (a->total_ns != b->total_ns) return a->total_ns > b->total_ns;
    return std::make_pair(a->region_id, a->thread_count) < std::make_pair(b->region_id, b->thread_count);
  });

  std::ostringstream os;
  os << "run " << result.run_id << "  default threads " << result.default_threads << "  regions " << rows.size()
     << '\n';
  os << std::left << std::setw(8) << "region" << std::right << std::setw(8) << "threads" << std::setw(10) << "visits"
     << std::setw(14) << "total[s]" << std::setw(14) << "mean[s]" << std::setw(14) << "min[s]" << std::setw(14)
     << "max[s]" << '\n';
  for (const auto* p : rows) {
    os << std::left << std::setw(8) << p->region_id << std::right << std::setw(8) << p->thread_count << std::setw(10)
       << p->visits << std::setw(14) << text::format_seconds(p->total_ns) << std::setw(14)
       << text::format_fixed(p->mean_seconds(), 6) << std::setw(14) << text::format_seconds(p->min_ns)
       << std::setw(14) << text::format_seconds(p->max_ns) << '\n';
    for (const auto& [event, count] : p->counter_totals) {
      os << "          " << std::left << std::setw(24) << event << std::right << count << '\n';
    }
  }
  if (!result.unbalanced_regions.empty()) {
    os << "unbalanced regions:";
    for (auto id : result.unbalanced_regions) os << ' ' << id;
    os << '\n';
  }
  return os.str();
}

}  // namespace pdttagger
