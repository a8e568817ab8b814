#pragma once

// Thread-count search: candidate generation, trial execution (real command
// or simulated cost model), per-region argmin plans, and cost-model fitting.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <string_view>
#include <vector>

#include "pdttagger/counters.hpp"
#include "pdttagger/error.hpp"
#include "pdttagger/profile.hpp"
#include "pdttagger/runtime.hpp"
#include "pdttagger/text.hpp"

namespace pdttagger {

/// Strictly increasing, non-empty list of thread counts.
class CandidateSet {
 public:
  explicit CandidateSet(std::vector<int> counts) : counts_(std::move(counts)) {
    if (counts_.empty()) throw Error(ErrorCode::InvalidArgument, "candidate set must not be empty");
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (counts_[i] < 1) throw Error(ErrorCode::InvalidArgument, "thread counts must be positive");
      if (i > 0 && counts_[i] <= counts_[i - 1]) {
        throw Error(ErrorCode::InvalidArgument, "candidates must be strictly increasing");
      }
    }
  }

  /// [C, 2C, 4C], optionally preceded by 1.
  static CandidateSet from_cores(int cores, bool include_one = false) {
    if (cores < 1) throw Error(ErrorCode::InvalidArgument, "core count must be positive");
    std::vector<int> c;
    if (include_one && cores > 1) c.push_back(1);
    c.insert(c.end(), {cores, 2 * cores, 4 * cores});
    return CandidateSet(std::move(c));
  }

  static CandidateSet parse(std::string_view list) {
    std::vector<int> c;
    for (auto tok : text::split(list, ',')) {
      const auto v = text::parse_int<int>(text::trim(tok));
      if (!v) throw Error(ErrorCode::InvalidArgument, "bad candidate '" + std::string(tok) + "'");
      c.push_back(*v);
    }
    return CandidateSet(std::move(c));
  }

  const std::vector<int>& counts() const { return counts_; }

 private:
  std::vector<int> counts_;
};

struct TrialResult {
  int candidate = 0;
  std::map<RegionId, double> mean_time;  // seconds
  RunResult run;
  std::string command;
  std::string timestamp;
};

/// Per-region mean seconds over every stanza of the region in `run`.
inline std::map<RegionId, double> mean_times(const RunResult& run) {
  std::map<RegionId, std::pair<std::int64_t, std::uint64_t>> acc;
  for (const auto& [key, p] : run.profiles) {
    acc[p.region_id].first += p.total_ns;
    acc[p.region_id].second += p.visits;
  }
  std::map<RegionId, double> out;
  for (const auto& [id, tv] : acc) {
    if (tv.second > 0) out[id] = static_cast<double>(tv.first) * 1e-9 / static_cast<double>(tv.second);
  }
  return out;
}

inline TrialResult make_trial(int candidate, RunResult run, std::string command = {}) {
  TrialResult t;
  t.candidate = candidate;
  t.mean_time = mean_times(run);
  t.run = std::move(run);
  t.command = std::move(command);
  return t;
}

inline double speedup(double t_base, double t_n) {
  if (!(t_base > 0) || !(t_n > 0)) throw Error(ErrorCode::InvalidArgument, "speedup needs positive times");
  return t_base / t_n;
}

// ---------------------------------------------------------------------------
// Plan construction.

/// Per-region argmin over the trials (ties toward fewer threads); the default
/// minimizes the summed mean time of regions measured in every trial.
inline ThreadPlan build_plan(const std::vector<TrialResult>& trials, Diagnostics* warnings = nullptr) {
  if (trials.size() < 2) {
    throw Error(ErrorCode::InsufficientTrials, "need at least 2 successful trials, have " +
                                                   std::to_string(trials.size()));
  }
  std::vector<const TrialResult*> sorted;
  for (const auto& t : trials) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->candidate < b->candidate; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->candidate == sorted[i - 1]->candidate) {
      throw Error(ErrorCode::InvalidArgument, "duplicate trial for candidate " + std::to_string(sorted[i]->candidate));
    }
  }

  std::set<RegionId> regions;
  for (auto* t : sorted) {
    for (const auto& [id, m] : t->mean_time) regions.insert(id);
  }

  ThreadPlan plan;
  std::set<RegionId> common;
  for (auto id : regions) {
    std::optional<int> best;
    double best_time = 0;
    std::size_t seen = 0;
    for (auto* t : sorted) {
      const auto it = t->mean_time.find(id);
      if (it == t->mean_time.end()) continue;
      ++seen;
      if (!best || it->second < best_time) {
        best = t->candidate;
        best_time = it->second;
      }
    }
    if (seen < 2) {
      if (warnings) {
        warnings->push_back({"RegionUnderMeasured", "region " + std::to_string(id) +
                                                        " measured in only one trial; no override"});
      }
      continue;
    }
    plan.overrides[id] = *best;
    if (seen == sorted.size()) common.insert(id);
  }

  if (common.empty()) {
    plan.default_threads = sorted.front()->candidate;
    if (warnings) {
      warnings->push_back({"NoCommonRegions", "no region measured in every trial; default is the smallest candidate"});
    }
    return plan;
  }
  std::optional<int> best;
  double best_sum = 0;
  for (auto* t : sorted) {
    double sum = 0;
    for (auto id : common) sum += t->mean_time.at(id);
    if (!best || sum < best_sum) {
      best = t->candidate;
      best_sum = sum;
    }
  }
  plan.default_threads = *best;
  return plan;
}

// ---------------------------------------------------------------------------
// Cost model.

struct RegionCost {
  double t_serial = 0;             // s
  double work_parallel = 0;        // s * core
  double overhead_per_thread = 0;  // s
  double smt2_eff = 0;             // [0,1]
  double smt4_eff = 0;             // [0, smt2_eff]

  bool operator==(const RegionCost&) const = default;
};

struct CostModel {
  int cores = 1;
  std::map<RegionId, RegionCost> regions;
  std::map<RegionId, std::string> names;

  bool operator==(const CostModel&) const = default;
};

/// Effective parallelism: full credit up to C threads, smt2_eff per thread up
/// to 2C, smt4_eff per thread up to 4C, flat beyond.
inline double effective_parallelism(const RegionCost& p, int cores, int n) {
  const double c = cores;
  const double m = n;
  return std::min(m, c) + p.smt2_eff * std::max(0.0, std::min(m, 2 * c) - c) +
         p.smt4_eff * std::max(0.0, std::min(m, 4 * c) - 2 * c);
}

inline double model_time(const RegionCost& p, int cores, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "thread count must be >= 1");
  return p.t_serial + p.work_parallel / effective_parallelism(p, cores, n) + p.overhead_per_thread * n;
}

struct FitResult {
  RegionCost params;
  std::map<int, double> relative_error;  // per observation: model/observed - 1
  double objective = 0;                  // sum of squared relative errors
};

namespace detail {

inline int smt_tier(int n, int cores) { return n <= cores ? 1 : (n <= 2 * cores ? 2 : 4); }

struct LinearFit {
  std::array<double, 3> coef{};  // t_serial, work_parallel, overhead_per_thread
  double objective = std::numeric_limits<double>::infinity();
};

/// Non-negative least squares in three variables by active-set enumeration.
/// rows[i] = {1/y, x/y, n/y}; target is 1 for every row.
inline LinearFit nnls3(const std::vector<std::array<double, 3>>& rows) {
  LinearFit best;
  const double empty_objective = static_cast<double>(rows.size());
  best.objective = empty_objective;
  for (unsigned mask = 1; mask < 8; ++mask) {
    std::vector<int> vars;
    for (int k = 0; k < 3; ++k) {
      if (mask & (1u << k)) vars.push_back(k);
    }
    const std::size_t m = vars.size();
    std::array<std::array<double, 4>, 3> aug{};
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        double s = 0;
        for (const auto& r : rows) s += r[vars[a]] * r[vars[b]];
        aug[a][b] = s;
      }
      double s = 0;
      for (const auto& r : rows) s += r[vars[a]];
      aug[a][m] = s;
    }
    bool singular = false;
    for (std::size_t col = 0; col < m && !singular; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < m; ++r) {
        if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
      }
      if (std::abs(aug[piv][col]) < 1e-300) {
        singular = true;
        break;
      }
      std::swap(aug[col], aug[piv]);
      for (std::size_t r = 0; r < m; ++r) {
        if (r == col) continue;
        const double f = aug[r][col] / aug[col][col];
        for (std::size_t k = col; k <= m; ++k) aug[r][k] -= f * aug[col][k];
      }
    }
    if (singular) continue;
    std::array<double, 3> coef{};
    bool feasible = true;
    for (std::size_t a = 0; a < m; ++a) {
      const double v = aug[a][m] / aug[a][a];
      if (!(v >= 0)) {
        feasible = false;
        break;
      }
      coef[vars[a]] = v;
    }
    if (!feasible) continue;
    double obj = 0;
    for (const auto& r : rows) {
      const double e = r[0] * coef[0] + r[1] * coef[1] + r[2] * coef[2] - 1.0;
      obj += e * e;
    }
    if (obj < best.objective) {
      best.objective = obj;
      best.coef = coef;
    }
  }
  return best;
}

inline LinearFit fit_linear(const std::map<int, double>& obs, int cores, double s2, double s4) {
  RegionCost p;
  p.smt2_eff = s2;
  p.smt4_eff = s4;
  std::vector<std::array<double, 3>> rows;
  for (const auto& [n, y] : obs) {
    rows.push_back({1.0 / y, 1.0 / (effective_parallelism(p, cores, n) * y), n / y});
  }
  return nnls3(rows);
}

}  // namespace detail

/// Fits one region's parameters to observed (threads -> seconds) by
/// minimizing squared relative error. The linear parameters are solved
/// exactly for each (smt2_eff, smt4_eff); those two are found by a grid
/// followed by a shrinking pattern search.
inline FitResult fit_cost_model(const std::map<int, double>& observations, int cores) {
  if (cores < 1) throw Error(ErrorCode::InvalidArgument, "core count must be positive");
  if (observations.size() < 3) {
    throw Error(ErrorCode::DegenerateFit, "need at least 3 observations, have " + std::to_string(observations.size()));
  }
  std::set<int> tiers;
  for (const auto& [n, y] : observations) {
    if (n < 1 || !std::isfinite(y) || y <= 0) {
      throw Error(ErrorCode::DegenerateFit, "observation at " + std::to_string(n) + " threads is not a positive time");
    }
    tiers.insert(detail::smt_tier(n, cores));
  }
  if (tiers.size() < 2) throw Error(ErrorCode::DegenerateFit, "observations must span at least two SMT tiers");

  auto eval = [&](double s2, double s4) { return detail::fit_linear(observations, cores, s2, s4).objective; };

  double best_s2 = 0, best_s4 = 0;
  double best = eval(0, 0);
  constexpr int kGrid = 100;
  for (int i = 0; i <= kGrid; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double s2 = static_cast<double>(i) / kGrid;
      const double s4 = static_cast<double>(j) / kGrid;
      const double v = eval(s2, s4);
      if (v < best) {
        best = v;
        best_s2 = s2;
        best_s4 = s4;
      }
    }
  }
  static constexpr std::array<std::array<double, 2>, 8> dirs = {
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};
  for (double step = 1.0 / kGrid; step > 1e-13; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (const auto& d : dirs) {
        const double s2 = std::clamp(best_s2 + d[0] * step, 0.0, 1.0);
        const double s4 = std::clamp(best_s4 + d[1] * step, 0.0, s2);
        const double v = eval(s2, s4);
        if (v < best) {
          best = v;
          best_s2 = s2;
          best_s4 = s4;
          improved = true;
        }
      }
    }
  }

  const auto lin = detail::fit_linear(observations, cores, best_s2, best_s4);
  FitResult fit;
  fit.params = {lin.coef[0], lin.coef[1], lin.coef[2], best_s2, best_s4};
  fit.objective = lin.objective;
  double worst = 0;
  for (const auto& [n, y] : observations) {
    const double e = model_time(fit.params, cores, n) / y - 1.0;
    fit.relative_error[n] = e;
    worst = std::max(worst, std::abs(e));
  }
  if (lin.coef == std::array<double, 3>{} || worst > 0.5) {
    std::ostringstream os;
    os << "no feasible parameters reproduce the observations; relative residuals:";
    for (const auto& [n, e] : fit.relative_error) os << ' ' << n << ':' << text::format_fixed(e, 4);
    throw Error(ErrorCode::DegenerateFit, os.str());
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Model / observation files.

inline std::string emit_cost_model(const CostModel& model) {
  std::ostringstream os;
  os << "pdtmodel v1 " << model.cores << '\n';
  for (const auto& [id, p] : model.regions) {
    os << id << ' ' << text::format_shortest(p.t_serial) << ' ' << text::format_shortest(p.work_parallel) << ' '
       << text::format_shortest(p.overhead_per_thread) << ' ' << text::format_shortest(p.smt2_eff) << ' '
       << text::format_shortest(p.smt4_eff);
    if (const auto it = model.names.find(id); it != model.names.end()) os << ' ' << it->second;
    os << '\n';
  }
  return os.str();
}

inline CostModel parse_cost_model(std::string_view model_text) {
  auto fail = [](std::size_t line, const std::string& what) {
    return Error(ErrorCode::ModelSyntax, "line " + std::to_string(line) + ": " + what);
  };
  const auto lines = text::split_lines(model_text);
  if (lines.empty()) throw fail(1, "missing header");
  const auto header = text::split_ws(lines[0].body);
  const auto cores = header.size() == 3 ? text::parse_int<int>(header[2]) : std::nullopt;
  if (header.size() != 3 || header[0] != "pdtmodel" || header[1] != "v1" || !cores || *cores < 1) {
    throw fail(1, "bad header");
  }
  CostModel m;
  m.cores = *cores;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = text::split_ws(lines[n].body);
    if (f.empty() || f[0].front() == '#') continue;
    if (f.size() != 6 && f.size() != 7) throw fail(n + 1, "expected '<id> <t_serial> <work> <overhead> <smt2> <smt4> [name]'");
    const auto id = text::parse_int<RegionId>(f[0]);
    std::array<double, 5> v{};
    for (std::size_t k = 0; k < 5; ++k) {
      const auto d = text::parse_double(f[k + 1]);
      if (!d || !std::isfinite(*d)) throw fail(n + 1, "bad number '" + std::string(f[k + 1]) + "'");
      v[k] = *d;
    }
    if (!id || *id < 0) throw fail(n + 1, "bad region id");
    const RegionCost p{v[0], v[1], v[2], v[3], v[4]};
    if (p.t_serial < 0 || p.work_parallel < 0 || p.overhead_per_thread < 0 || p.smt4_eff < 0 ||
        p.smt4_eff > p.smt2_eff || p.smt2_eff > 1) {
      throw fail(n + 1, "parameters violate 0 <= smt4_eff <= smt2_eff <= 1 or are negative");
    }
    if (!m.regions.emplace(*id, p).second) throw fail(n + 1, "duplicate region id");
    if (f.size() == 7) m.names[*id] = std::string(f[6]);
  }
  return m;
}

struct Observations {
  int cores = 1;
  std::map<RegionId, std::map<int, double>> times;  // region -> threads -> seconds
  std::map<RegionId, std::string> names;
};

/// "pdtobs v1 <cores>" then "<region_id> <threads> <seconds> [name]" lines.
inline Observations parse_observations(std::string_view obs_text) {
  auto fail = [](std::size_t line, const std::string& what) {
    return Error(ErrorCode::ModelSyntax, "line " + std::to_string(line) + ": " + what);
  };
  const auto lines = text::split_lines(obs_text);
  if (lines.empty()) throw fail(1, "missing header");
  const auto header = text::split_ws(lines[0].body);
  const auto cores = header.size() == 3 ? text::parse_int<int>(header[2]) : std::nullopt;
  if (header.size() != 3 || header[0] != "pdtobs" || header[1] != "v1" || !cores || *cores < 1) {
    throw fail(1, "bad header");
  }
  Observations o;
  o.cores = *cores;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = text::split_ws(lines[n].body);
    if (f.empty() || f[0].front() == '#') continue;
    if (f.size() != 3 && f.size() != 4) throw fail(n + 1, "expected '<region_id> <threads> <seconds> [name]'");
    const auto id = text::parse_int<RegionId>(f[0]);
    const auto threads = text::parse_int<int>(f[1]);
    const auto secs = text::parse_double(f[2]);
    if (!id || *id < 0 || !threads || *threads < 1 || !secs) throw fail(n + 1, "bad observation");
    if (!o.times[*id].emplace(*threads, *secs).second) throw fail(n + 1, "duplicate observation");
    if (f.size() == 4) o.names[*id] = std::string(f[3]);
  }
  return o;
}

// ---------------------------------------------------------------------------
// Trials.

/// Runs the program once at a candidate thread count and returns the text
/// of the result file it produced. Throws Error(TrialFailed) on failure.
class TrialExecutor {
 public:
  virtual ~TrialExecutor() = default;
  virtual std::string run(int candidate) = 0;
  virtual std::string describe(int candidate) const = 0;
};

/// Simulated executor: drives the runtime with a manual clock advanced by
/// model_time for each visit, with synthetic counters attached.
class ModelExecutor final : public TrialExecutor {
 public:
  explicit ModelExecutor(CostModel model, int visits_per_region = 1, SyntheticCounterModel counters = {})
      : model_(std::move(model)), visits_(visits_per_region), counters_(std::move(counters)) {
    if (visits_ < 1) throw Error(ErrorCode::InvalidArgument, "visits per region must be positive");
  }

  std::string run(int candidate) override { return emit_result(simulate(candidate)); }

  RunResult simulate(int candidate) const {
    auto clock = std::make_shared<ManualClock>();
    RuntimeOptions opts;
    opts.plan.default_threads = candidate;
    opts.clock = clock;
    opts.provider = std::make_shared<SyntheticProvider>(counters_);
    opts.run_id = "model-" + std::to_string(candidate);
    Runtime rt(std::move(opts));
    for (const auto& [id, p] : model_.regions) {
      const auto ns = static_cast<std::int64_t>(std::llround(model_time(p, model_.cores, candidate) * 1e9));
      for (int v = 0; v < visits_; ++v) {
        const auto tok = rt.region_begin(id);
        clock->advance(ns);
        rt.region_end(tok);
      }
    }
    return rt.result();
  }

  std::string describe(int candidate) const override { return "model@" + std::to_string(candidate); }

 private:
  CostModel model_;
  int visits_;
  SyntheticCounterModel counters_;
};

/// Human-readable form of a std::system() status.
inline std::string describe_status(int status) {
  if (status == -1) return "could not be started";
  if (WIFEXITED(status)) return "exited with status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "was killed by signal " + std::to_string(WTERMSIG(status));
  return "failed with status " + std::to_string(status);
}

/// Runs a shell command template once per candidate. `{threads}` and `{out}`
/// are substituted; PDTTAGGER_PLAN, PDTTAGGER_OUT and OMP_NUM_THREADS are set
/// for the child.
class CommandExecutor final : public TrialExecutor {
 public:
  CommandExecutor(std::string command_template, std::filesystem::path work_dir)
      : template_(std::move(command_template)), work_dir_(std::move(work_dir)) {}

  std::string expand(int candidate) const {
    std::string cmd = template_;
    replace_all(cmd, "{threads}", std::to_string(candidate));
    replace_all(cmd, "{out}", out_dir(candidate).string());
    return cmd;
  }

  std::filesystem::path out_dir(int candidate) const { return work_dir_ / ("trial-" + std::to_string(candidate)); }

  std::string run(int candidate) override {
    const auto dir = out_dir(candidate);
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::TrialFailed, "cannot create " + dir.string());
    ThreadPlan plan;
    plan.default_threads = candidate;
    text::write_file_atomic(dir / "plan.txt", emit_plan(plan));

    const ScopedEnv e1("PDTTAGGER_PLAN", (dir / "plan.txt").string());
    const ScopedEnv e2("PDTTAGGER_OUT", dir.string());
    const ScopedEnv e3("OMP_NUM_THREADS", std::to_string(candidate));
    const auto cmd = expand(candidate);
    const int status = std::system(cmd.c_str());
    if (status != 0) {
      throw Error(ErrorCode::TrialFailed, "command '" + cmd + "' " + describe_status(status));
    }
    const auto result = dir / kResultFileName;
    if (!std::filesystem::exists(result)) {
      throw Error(ErrorCode::TrialFailed, "command '" + cmd + "' produced no " + result.string());
    }
    return text::read_file(result);
  }

  std::string describe(int candidate) const override { return expand(candidate); }

 private:
  struct ScopedEnv {
    ScopedEnv(const char* name, const std::string& value) : name_(name) {
      if (const char* old = std::getenv(name)) old_ = old;
      ::setenv(name, value.c_str(), 1);
    }
    ~ScopedEnv() {
      if (old_) {
        ::setenv(name_, old_->c_str(), 1);
      } else {
        ::unsetenv(name_);
      }
    }
    ScopedEnv(const ScopedEnv&) = delete;
    ScopedEnv& operator=(const ScopedEnv&) = delete;
    const char* name_;
    std::optional<std::string> old_;
  };

  static void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) {
      s.replace(p, from.size(), to);
    }
  }

  std::string template_;
  std::filesystem::path work_dir_;
};

/// One trial per candidate, in candidate order. Failed candidates are
/// excluded and reported in `exclusions`; at least two must succeed.
/// When `regions` is non-empty only those region ids are kept.
inline std::vector<TrialResult> run_trials(TrialExecutor& executor, const std::set<RegionId>& regions,
                                           const CandidateSet& candidates, Diagnostics* exclusions = nullptr) {
  std::vector<TrialResult> trials;
  for (int n : candidates.counts()) {
    try {
      auto run = parse_result(executor.run(n));
      if (!regions.empty()) {
        for (auto it = run.profiles.begin(); it != run.profiles.end();) {
          it = regions.count(it->first.first) ? std::next(it) : run.profiles.erase(it);
        }
      }
      auto t = make_trial(n, std::move(run), executor.describe(n));
      const auto now = std::chrono::system_clock::now().time_since_epoch();
      t.timestamp = std::to_string(std::chrono::duration_cast<std::chrono::seconds>(now).count());
      trials.push_back(std::move(t));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TrialFailed && e.code() != ErrorCode::ResultSyntax && e.code() != ErrorCode::IoFailure) {
        throw;
      }
      if (exclusions) exclusions->push_back({"TrialFailed", "candidate " + std::to_string(n) + ": " + e.what()});
    }
  }
  if (trials.size() < 2) {
    throw Error(ErrorCode::InsufficientTrials,
                std::to_string(trials.size()) + " of " + std::to_string(candidates.counts().size()) +
                    " trials succeeded; at least 2 are needed");
  }
  return trials;
}

// ---------------------------------------------------------------------------
// Tuning database: "pdttrials v1", then per trial a "trial <candidate>"
// line followed by result-file stanzas.

inline std::string emit_trials(const std::vector<TrialResult>& trials) {
  std::ostringstream os;
  os << "pdttrials v1\n";
  for (const auto& t : trials) {
    os << "trial " << t.candidate << '\n';
    const auto body = emit_result(t.run);
    os << body.substr(body.find('\n') + 1);
  }
  return os.str();
}

inline std::vector<TrialResult> parse_trials(std::string_view db_text) {
  const auto lines = text::split_lines(db_text);
  if (lines.empty() || text::trim(lines[0].body) != "pdttrials v1") {
    throw Error(ErrorCode::TrialsSyntax, "line 1: bad header");
  }
  std::vector<TrialResult> trials;
  std::optional<int> candidate;
  std::string stanzas;
  auto flush = [&](std::size_t line) {
    if (!candidate) return;
    RunResult run;
    try {
      run = parse_result("pdtresult v1 trial " + std::to_string(*candidate) + "\n" + stanzas);
    } catch (const Error& e) {
      throw Error(ErrorCode::TrialsSyntax, "trial ending before line " + std::to_string(line) + ": " + e.what());
    }
    run.run_id = "trial-" + std::to_string(*candidate);
    trials.push_back(make_trial(*candidate, std::move(run)));
    stanzas.clear();
  };
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = text::split_ws(lines[n].body);
    if (!f.empty() && f[0] == "trial") {
      flush(n + 1);
      const auto c = f.size() == 2 ? text::parse_int<int>(f[1]) : std::nullopt;
      if (!c || *c < 1) throw Error(ErrorCode::TrialsSyntax, "line " + std::to_string(n + 1) + ": bad trial header");
      candidate = *c;
      continue;
    }
    if (f.empty()) continue;
    if (!candidate) throw Error(ErrorCode::TrialsSyntax, "line " + std::to_string(n + 1) + ": stanza before trial");
    stanzas += lines[n].body;
    stanzas += '\n';
  }
  flush(lines.size() + 1);
  return trials;
}

}  // namespace pdttagger
