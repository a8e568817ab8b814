#pragma once

// Hook semantics: per-visit timing and counter capture, thread-plan lookup,
// aggregation, and result/viz emission.
//
// Nesting state is thread-local; aggregation is guarded by one mutex.
// Timing is inclusive: nested visits are not subtracted from their parent.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "pdttagger/counters.hpp"
#include "pdttagger/error.hpp"
#include "pdttagger/profile.hpp"
#include "pdttagger/rewriter.hpp"
#include "pdttagger/text.hpp"

namespace pdttagger {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ns() = 0;
};

class SteadyClock final : public Clock {
 public:
  std::int64_t now_ns() override {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }
};

/// Clock advanced explicitly; drives simulated runs.
class ManualClock final : public Clock {
 public:
  std::int64_t now_ns() override { return now_.load(); }
  void advance(std::int64_t ns) { now_ += ns; }

 private:
  std::atomic<std::int64_t> now_{0};
};

/// Runtime settings read from the environment.
struct RuntimeEnv {
  std::optional<std::string> plan_path;      // PDTTAGGER_PLAN
  std::optional<std::string> manifest_path;  // PDTTAGGER_MANIFEST
  std::string out_dir = ".";                 // PDTTAGGER_OUT
  bool viz = false;                          // PDTTAGGER_VIZ_OUTPUT == "TRUE"
  bool hpm_viz = false;                      // HPM_VIZ_OUTPUT == "yes"
  std::string counters;                      // PDTTAGGER_COUNTERS: "" or "synthetic"

  using Lookup = std::function<const char*(const char*)>;

  static RuntimeEnv from(const Lookup& getenv_fn) {
    RuntimeEnv env;
    auto get = [&](const char* name) -> std::optional<std::string> {
      const char* v = getenv_fn(name);
      if (!v) return std::nullopt;
      return std::string(v);
    };
    env.plan_path = get("PDTTAGGER_PLAN");
    env.manifest_path = get("PDTTAGGER_MANIFEST");
    if (auto out = get("PDTTAGGER_OUT"); out && !out->empty()) env.out_dir = *out;
    env.viz = get("PDTTAGGER_VIZ_OUTPUT") == std::optional<std::string>("TRUE");
    env.hpm_viz = get("HPM_VIZ_OUTPUT") == std::optional<std::string>("yes");
    env.counters = get("PDTTAGGER_COUNTERS").value_or("");
    return env;
  }

  static RuntimeEnv from_process() {
    return from([](const char* name) { return static_cast<const char*>(std::getenv(name)); });
  }
};

inline constexpr std::string_view kResultFileName = "pdttagger_result.txt";
inline constexpr std::string_view kVizFileName = "pdttagger_result.viz";

struct RuntimeOptions {
  std::optional<RegionManifest> manifest;  // absent: every id is accepted
  ThreadPlan plan;
  std::shared_ptr<CounterProvider> provider;  // absent: time-only records
  EventSet events = EventSet::canonical();
  std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>();
  std::string run_id;  // empty: derived from wall-clock time
};

struct VisitToken {
  std::uint64_t serial = 0;
  RegionId region = 0;
};

struct Balance {
  std::uint64_t begins = 0;
  std::uint64_t ends = 0;
  std::uint64_t unclosed = 0;  // still open, or abandoned by an out-of-order end
};

class Runtime {
 public:
  explicit Runtime(RuntimeOptions opts) : opts_(std::move(opts)), instance_(next_instance()) {
    if (opts_.run_id.empty()) {
      opts_.run_id = "run-" + std::to_string(std::chrono::duration_cast<std::chrono::seconds>(
                                                  std::chrono::system_clock::now().time_since_epoch())
                                                  .count());
    }
    if (opts_.manifest) {
      for (const auto& r : opts_.manifest->entries) known_.insert(r.id);
    }
  }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const ThreadPlan& plan() const { return opts_.plan; }

  /// Thread count the plan assigns to `id`. Read-only after construction.
  int region_threads(RegionId id) const { return opts_.plan.threads_for(id); }

  VisitToken region_begin(RegionId id) { return region_begin(id, region_threads(id)); }

  /// Starts a visit that records `threads` as the team size.
  VisitToken region_begin(RegionId id, int threads) {
    RegionId bucket = id;
    OpenVisit v;
    {
      std::lock_guard lock(mu_);
      if (opts_.manifest && !known_.count(id)) {
        diags_.push_back({"UnknownRegion", "region " + std::to_string(id) + " is not in the manifest"});
        bucket = kUnknownRegion;
      }
      v.serial = ++last_serial_;
      v.region = bucket;
      v.threads = threads;
      v.visit_index = counts_[bucket].begins++;
      open_[v.serial] = std::this_thread::get_id();
    }
    if (opts_.provider) {
      try {
        Diagnostics d;
        v.window = opts_.provider->open(opts_.events, {bucket, threads, v.visit_index}, &d);
        if (!d.empty()) add_diagnostics(d);
      } catch (const Error& e) {
        add_diagnostics({{"CounterFailure", e.what()}});
        v.window.reset();
      }
    }
    v.start_ns = opts_.clock->now_ns();
    stack().push_back(v);
    return {v.serial, bucket};
  }

  /// Ends the visit named by `token`. Any visits opened above it on this
  /// thread are abandoned so the stack stays LIFO.
  std::optional<VisitRecord> region_end(VisitToken token) {
    const auto stop = opts_.clock->now_ns();
    {
      std::lock_guard lock(mu_);
      const auto it = open_.find(token.serial);
      if (it == open_.end()) {
        if (token.serial >= 1 && token.serial <= last_serial_) {
          diags_.push_back({"TokenReuse", "visit " + std::to_string(token.serial) + " already ended"});
        } else {
          diags_.push_back({"Imbalance", "end for unknown visit " + std::to_string(token.serial)});
        }
        return std::nullopt;
      }
      if (it->second != std::this_thread::get_id()) {
        diags_.push_back({"CrossThreadEnd", "visit " + std::to_string(token.serial) + " ended on another thread"});
        return std::nullopt;
      }
    }
    auto& st = stack();
    std::size_t k = st.size();
    while (k > 0 && st[k - 1].serial != token.serial) --k;
    if (k == 0) return std::nullopt;  // unreachable: open_ says it is on this thread
    while (st.size() > k) {
      abandon(st.back());
      st.pop_back();
    }
    const auto v = st.back();
    st.pop_back();
    return close_visit(v, stop);
  }

  /// Ends the innermost open visit on this thread, which should be `id`.
  /// This is the path taken by the C hooks, which only know region ids.
  std::optional<VisitRecord> region_end_innermost(RegionId id) {
    const auto stop = opts_.clock->now_ns();
    auto& st = stack();
    if (st.empty()) {
      std::lock_guard lock(mu_);
      diags_.push_back({"Imbalance", "end of region " + std::to_string(id) + " without a matching begin"});
      return std::nullopt;
    }
    const auto v = st.back();
    if (v.region != id && !(v.region == kUnknownRegion)) {
      std::lock_guard lock(mu_);
      diags_.push_back({"Imbalance", "end of region " + std::to_string(id) + " while region " +
                                         std::to_string(v.region) + " is innermost"});
    }
    st.pop_back();
    return close_visit(v, stop);
  }

  RunResult result() const {
    std::lock_guard lock(mu_);
    RunResult r;
    r.run_id = opts_.run_id;
    r.default_threads = opts_.plan.default_threads;
    r.profiles = profiles_;
    for (const auto& [id, c] : counts_) {
      if (c.begins != c.ends) r.unbalanced_regions.push_back(id);
    }
    return r;
  }

  Diagnostics diagnostics() const {
    std::lock_guard lock(mu_);
    return diags_;
  }

  Balance balance() const {
    std::lock_guard lock(mu_);
    Balance b;
    for (const auto& [id, c] : counts_) {
      b.begins += c.begins;
      b.ends += c.ends;
    }
    b.unclosed = open_.size() + abandoned_;
    return b;
  }

  /// Writes the result file, plus the viz file when enabled. Must run once,
  /// after all worker threads are done.
  std::vector<std::filesystem::path> finalize(const std::filesystem::path& out_dir, const RuntimeEnv& env) const {
    const auto r = result();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    std::vector<std::filesystem::path> written;
    const auto result_path = out_dir / kResultFileName;
    text::write_file_atomic(result_path, emit_result(r));
    written.push_back(result_path);
    if (env.viz) {
      VizOptions vo;
      vo.include_counters = env.hpm_viz;
      if (opts_.manifest) vo.regions = &opts_.manifest->entries;
      const auto viz_path = out_dir / kVizFileName;
      text::write_file_atomic(viz_path, emit_viz(r, vo));
      written.push_back(viz_path);
    }
    return written;
  }

 private:
  struct OpenVisit {
    std::uint64_t serial = 0;
    RegionId region = 0;
    int threads = 1;
    std::uint64_t visit_index = 0;
    std::optional<WindowHandle> window;
    std::int64_t start_ns = 0;
  };

  struct Counts {
    std::uint64_t begins = 0;
    std::uint64_t ends = 0;
  };

  static std::uint64_t next_instance() {
    static std::atomic<std::uint64_t> n{0};
    return ++n;
  }

  std::vector<OpenVisit>& stack() {
    thread_local std::unordered_map<std::uint64_t, std::vector<OpenVisit>> stacks;
    return stacks[instance_];
  }

  void add_diagnostics(const Diagnostics& d) {
    std::lock_guard lock(mu_);
    diags_.insert(diags_.end(), d.begin(), d.end());
  }

  void release_window(const OpenVisit& v) {
    if (!v.window || !opts_.provider) return;
    try {
      opts_.provider->close(*v.window);
    } catch (const Error& e) {
      add_diagnostics({{"CounterFailure", e.what()}});
    }
  }

  void abandon(const OpenVisit& v) {
    release_window(v);
    std::lock_guard lock(mu_);
    open_.erase(v.serial);
    ++abandoned_;
    diags_.push_back({"Imbalance", "visit of region " + std::to_string(v.region) + " abandoned by an outer end"});
  }

  VisitRecord close_visit(const OpenVisit& v, std::int64_t stop_ns) {
    VisitRecord rec;
    rec.region_id = v.region;
    rec.thread_count_used = v.threads;
    rec.wall_time_ns = std::max<std::int64_t>(0, stop_ns - v.start_ns);
    if (v.window && opts_.provider) {
      try {
        rec.counters = opts_.provider->read(*v.window);
      } catch (const Error& e) {
        add_diagnostics({{"CounterFailure", e.what()}});
        rec.counters.clear();
      }
      release_window(v);
    }
    std::lock_guard lock(mu_);
    open_.erase(v.serial);
    ++counts_[v.region].ends;
    auto& p = profiles_[{v.region, v.threads}];
    p.region_id = v.region;
    p.thread_count = v.threads;
    p.fold(rec);
    return rec;
  }

  RuntimeOptions opts_;
  std::uint64_t instance_;
  std::set<RegionId> known_;

  mutable std::mutex mu_;
  std::uint64_t last_serial_ = 0;
  std::uint64_t abandoned_ = 0;
  std::map<std::uint64_t, std::thread::id> open_;
  std::map<RegionId, Counts> counts_;
  std::map<std::pair<RegionId, int>, RegionProfile> profiles_;
  Diagnostics diags_;
};

}  // namespace pdttagger
