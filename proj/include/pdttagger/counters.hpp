#pragma once

// Hardware-event measurement behind a provider interface, the deterministic
// synthetic provider, and derived feature metrics.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pdttagger/error.hpp"
#include "pdttagger/profile.hpp"
#include "pdttagger/text.hpp"

namespace pdttagger {

inline constexpr std::array<std::string_view, 6> kCanonicalEvents = {
    "cycles", "instructions", "l2_misses", "branch_mispredictions", "loads", "stores"};

inline bool is_canonical_event(std::string_view name) {
  for (auto e : kCanonicalEvents) {
    if (e == name) return true;
  }
  return false;
}

/// Ordered, duplicate-free, non-empty list of event names.
class EventSet {
 public:
  EventSet() = default;
  explicit EventSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw Error(ErrorCode::InvalidArgument, "event set must not be empty");
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (!seen.insert(n).second) throw Error(ErrorCode::InvalidArgument, "duplicate event '" + n + "'");
    }
  }

  static EventSet canonical() { return EventSet({kCanonicalEvents.begin(), kCanonicalEvents.end()}); }

  /// Comma-separated canonical names, as given on the command line.
  static EventSet parse(std::string_view list) {
    std::vector<std::string> names;
    for (auto n : text::split(list, ',')) {
      n = text::trim(n);
      if (!is_canonical_event(n)) throw Error(ErrorCode::UnsupportedEvent, "unknown event '" + std::string(n) + "'");
      names.emplace_back(n);
    }
    return EventSet(std::move(names));
  }

  const std::vector<std::string>& names() const { return names_; }
  bool empty() const { return names_.empty(); }

 private:
  std::vector<std::string> names_;
};

/// Identifies the visit a counter window measures.
struct WindowContext {
  RegionId region = 0;
  int threads = 1;
  std::uint64_t visit_index = 0;
};

using WindowHandle = std::uint64_t;

class CounterProvider {
 public:
  virtual ~CounterProvider() = default;

  /// Opens a window over the supported subset of `events`; unsupported names
  /// are reported as UnsupportedEvent diagnostics.
  virtual WindowHandle open(const EventSet& events, const WindowContext& ctx, Diagnostics* diags) = 0;
  /// Counts accumulated since open. Non-decreasing across reads.
  virtual CounterMap read(WindowHandle handle) = 0;
  virtual void close(WindowHandle handle) = 0;
};

struct SyntheticRates {
  double cycles_per_visit = 1000;
  double instr_per_visit = 1000;
  double l2_misses_per_kinstr = 0;
  double branch_misses_per_instr = 0;
  double loads_per_instr = 0;
  double stores_per_instr = 0;
  double jitter = 0;  // relative amplitude of the per-visit deterministic perturbation

  bool operator==(const SyntheticRates&) const = default;
};

class SyntheticCounterModel {
 public:
  SyntheticCounterModel() = default;
  explicit SyntheticCounterModel(SyntheticRates fallback) : fallback_(fallback) {}

  void set(RegionId id, SyntheticRates rates) { rates_[id] = rates; }

  const SyntheticRates& rates(RegionId id) const {
    const auto it = rates_.find(id);
    return it == rates_.end() ? fallback_ : it->second;
  }

  /// Counts for one visit; a pure function of its arguments.
  CounterMap counts(RegionId id, int threads, std::uint64_t visit_index) const {
    const auto& r = rates(id);
    double scale = 1.0;
    if (r.jitter != 0) {
      std::uint64_t h = text::fnv1a(std::to_string(id) + ":" + std::to_string(threads) + ":" +
                                    std::to_string(visit_index));
      const double u = static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);  // [0,1)
      scale = 1.0 + r.jitter * (2.0 * u - 1.0);
    }
    auto round = [](double v) { return static_cast<std::uint64_t>(std::llround(std::max(0.0, v))); };
    const double instr = r.instr_per_visit * scale;
    CounterMap c;
    c["cycles"] = round(r.cycles_per_visit * scale);
    c["instructions"] = round(instr);
    c["l2_misses"] = round(instr * r.l2_misses_per_kinstr / 1000.0);
    c["branch_mispredictions"] = round(instr * r.branch_misses_per_instr);
    c["loads"] = round(instr * r.loads_per_instr);
    c["stores"] = round(instr * r.stores_per_instr);
    return c;
  }

 private:
  SyntheticRates fallback_;
  std::map<RegionId, SyntheticRates> rates_;
};

/// Deterministic provider backed by SyntheticCounterModel. A window reports
/// the full per-visit counts from its first read onward.
class SyntheticProvider final : public CounterProvider {
 public:
  explicit SyntheticProvider(SyntheticCounterModel model = {}) : model_(std::move(model)) {}

  WindowHandle open(const EventSet& events, const WindowContext& ctx, Diagnostics* diags) override {
    std::vector<std::string> supported;
    for (const auto& e : events.names()) {
      if (is_canonical_event(e)) {
        supported.push_back(e);
      } else if (diags) {
        diags->push_back({std::string(to_string(ErrorCode::UnsupportedEvent)), "event '" + e + "' is not supported"});
      }
    }
    std::lock_guard lock(mu_);
    const auto h = ++next_;
    windows_[h] = Window{ctx, std::move(supported)};
    return h;
  }

  CounterMap read(WindowHandle handle) override {
    std::lock_guard lock(mu_);
    const auto it = windows_.find(handle);
    if (it == windows_.end()) throw Error(ErrorCode::WindowMisuse, "read on unknown window " + std::to_string(handle));
    const auto all = model_.counts(it->second.ctx.region, it->second.ctx.threads, it->second.ctx.visit_index);
    CounterMap out;
    for (const auto& e : it->second.events) out[e] = all.at(e);
    return out;
  }

  void close(WindowHandle handle) override {
    std::lock_guard lock(mu_);
    if (windows_.erase(handle) == 0) {
      throw Error(ErrorCode::WindowMisuse, "close on unknown window " + std::to_string(handle));
    }
  }

  std::size_t open_windows() const {
    std::lock_guard lock(mu_);
    return windows_.size();
  }

 private:
  struct Window {
    WindowContext ctx;
    std::vector<std::string> events;
  };

  SyntheticCounterModel model_;
  mutable std::mutex mu_;
  WindowHandle next_ = 0;
  std::map<WindowHandle, Window> windows_;
};

// ---------------------------------------------------------------------------
// Features.

inline constexpr std::array<std::string_view, 5> kFeatureNames = {"ipc", "l2_mpki", "branch_miss_rate",
                                                                  "mem_fraction", "time_per_visit"};

struct FeatureVector {
  double ipc = 0;
  double l2_mpki = 0;
  double branch_miss_rate = 0;
  double mem_fraction = 0;
  double time_per_visit = 0;
  std::set<std::string> missing_events;  // events absent from the profile

  /// Values in kFeatureNames order.
  std::vector<double> values() const { return {ipc, l2_mpki, branch_miss_rate, mem_fraction, time_per_visit}; }

  bool operator==(const FeatureVector&) const = default;
};

inline FeatureVector derive_features(const RegionProfile& profile) {
  const auto& c = profile.counter_totals;
  auto get = [&](std::string_view e) -> std::optional<double> {
    const auto it = c.find(std::string(e));
    if (it == c.end()) return std::nullopt;
    return static_cast<double>(it->second);
  };
  const auto cycles = get("cycles");
  const auto instr = get("instructions");
  if (!cycles || !instr || *cycles <= 0 || *instr <= 0) {
    throw Error(ErrorCode::InsufficientCounters, "region " + std::to_string(profile.region_id) +
                                                     " needs non-zero cycles and instructions");
  }
  FeatureVector f;
  f.ipc = *instr / *cycles;
  if (const auto m = get("l2_misses")) {
    f.l2_mpki = 1000.0 * *m / *instr;
  } else {
    f.missing_events.insert("l2_misses");
  }
  if (const auto b = get("branch_mispredictions")) {
    f.branch_miss_rate = *b / *instr;
  } else {
    f.missing_events.insert("branch_mispredictions");
  }
  const auto loads = get("loads");
  const auto stores = get("stores");
  if (loads && stores) {
    f.mem_fraction = (*loads + *stores) / *instr;
  } else {
    if (!loads) f.missing_events.insert("loads");
    if (!stores) f.missing_events.insert("stores");
  }
  f.time_per_visit = profile.mean_seconds();
  return f;
}

}  // namespace pdttagger
