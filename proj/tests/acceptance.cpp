// Acceptance checks: one PASS/FAIL line per criterion. Exit status is
// nonzero when any check fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "pdttagger/pdttagger.hpp"
#include "program_gen.hpp"
#include "support.hpp"

using namespace pdttagger;

namespace {

/// Collects the first failure message of a check.
struct Check {
  std::string failure;
  void expect(bool ok, const std::string& what) {
    if (!ok && failure.empty()) failure = what;
  }
};

const std::map<std::string, int> kSmtBest = {
    {"Strassen", 64}, {"NQueens", 128}, {"SparseLU", 64}, {"Health", 64}, {"Floorplan", 32}};

Observations smt_timings() { return parse_observations(text::read_file(testsupport::data("bots-smt.obs"))); }

TrialResult trial_of(int n, const std::map<RegionId, double>& secs) {
  RunResult r;
  r.default_threads = n;
  for (const auto& [id, s] : secs) {
    RegionProfile p;
    p.region_id = id;
    p.thread_count = n;
    p.fold({id, n, static_cast<std::int64_t>(std::llround(s * 1e9)), {}});
    r.profiles[{id, n}] = p;
  }
  return make_trial(n, r);
}

void smt_argmin(Check& c) {
  const auto obs = smt_timings();
  std::vector<TrialResult> trials;
  for (int n : {32, 64, 128}) {
    std::map<RegionId, double> secs;
    for (const auto& [id, t] : obs.times) secs[id] = t.at(n);
    trials.push_back(trial_of(n, secs));
  }
  const auto plan = build_plan(trials);
  for (const auto& [id, name] : obs.names) {
    c.expect(plan.threads_for(id) == kSmtBest.at(name),
             name + " got " + std::to_string(plan.threads_for(id)));
  }
  const auto tie = build_plan({trial_of(64, {{0, 1.0}}), trial_of(32, {{0, 1.0}}), trial_of(128, {{0, 1.0}})});
  c.expect(tie.threads_for(0) == 32, "tie did not go to the smaller candidate");
}

void speedups(Check& c) {
  const double a = speedup(101.05, 5.11);
  const double b = speedup(27.8, 0.79);
  c.expect(std::abs(a - 19.775) <= 1e-3, "speedup(101.05, 5.11) = " + std::to_string(a));
  c.expect(std::abs(b - 35.19) <= 1e-2, "speedup(27.8, 0.79) = " + std::to_string(b));
}

void calibration(Check& c) {
  const auto obs = smt_timings();
  for (const auto& [id, times] : obs.times) {
    const auto& name = obs.names.at(id);
    const auto fit = fit_cost_model(times, obs.cores);
    for (const auto& [n, e] : fit.relative_error) {
      c.expect(std::abs(e) <= 0.15, name + " off by " + std::to_string(e) + " at " + std::to_string(n));
    }
    int best = 0;
    double best_t = 0;
    for (int n : {32, 64, 128}) {
      const double t = model_time(fit.params, obs.cores, n);
      if (best == 0 || t < best_t) {
        best = n;
        best_t = t;
      }
    }
    c.expect(best == kSmtBest.at(name), name + " model argmin " + std::to_string(best));
  }
}

void golden_suite(Check& c) {
  std::size_t fixtures = 0;
  for (const auto& name : testsupport::corpus_names()) {
    const auto src = text::read_file(testsupport::fixture(name + ".c"));
    const auto res = instrument(src, scan_source(src, name + ".c"));
    c.expect(res.text == text::read_file(testsupport::golden(name + ".c")), name + " differs from golden");
    c.expect(emit_manifest(res.manifest) == text::read_file(testsupport::golden(name + ".manifest")),
             name + " manifest differs from golden");
    c.expect(strip(res.text) == src, name + " strip is not the inverse");
    bool refused = false;
    try {
      instrument(res.text, {});
    } catch (const Error& e) {
      refused = e.code() == ErrorCode::AlreadyInstrumented;
    }
    c.expect(refused, name + " instrumented twice");
    ++fixtures;
  }
  c.expect(fixtures >= 5, "fewer than 5 fixtures");

  std::mt19937_64 pick(7);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    testsupport::ProgramGenerator gen(seed);
    const auto p = gen.generate();
    const auto all = scan_source(p.text, "gen.c");
    std::vector<Region> selected;
    for (const auto& r : all) {
      if (pick() % 3 != 0) selected.push_back(r);
    }
    if (selected.empty() && !all.empty()) selected.push_back(all.front());
    const auto r = instrument(p.text, selected);
    c.expect(strip(r.text) == p.text, "random case " + std::to_string(seed) + " does not round trip");
    if (!selected.empty()) {
      bool refused = false;
      try {
        instrument(r.text, selected);
      } catch (const Error&) {
        refused = true;
      }
      c.expect(refused, "random case " + std::to_string(seed) + " instrumented twice");
    }
  }
}

void runtime_state_machine(Check& c) {
  auto clock = std::make_shared<ManualClock>();
  RuntimeOptions opts;
  opts.clock = clock;
  opts.run_id = "acceptance";
  Runtime rt(std::move(opts));
  constexpr int kThreads = 8;
  constexpr int kPerThread = 1250;
  std::vector<std::map<RegionId, std::uint64_t>> expected(kThreads);
  std::vector<int> lifo_errors(kThreads, 0);
  std::vector<std::thread> workers;
  for (int w = 0; w < kThreads; ++w) {
    workers.emplace_back([&, w] {
      std::mt19937 rng(100 + w);
      std::vector<VisitToken> open;
      int started = 0;
      while (started < kPerThread || !open.empty()) {
        if (started < kPerThread && open.size() < 4 && (open.empty() || rng() % 2)) {
          const auto id = static_cast<RegionId>(rng() % 8);
          open.push_back(rt.region_begin(id));
          ++expected[w][id];
          ++started;
          clock->advance(1 + rng() % 1000);
        } else {
          const auto t = open.back();
          open.pop_back();
          const auto rec = rt.region_end(t);
          if (!rec || rec->region_id != t.region) ++lifo_errors[w];
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (int w = 0; w < kThreads; ++w) c.expect(lifo_errors[w] == 0, "LIFO violation on thread " + std::to_string(w));
  std::map<RegionId, std::uint64_t> total;
  for (const auto& m : expected) {
    for (const auto& [id, n] : m) total[id] += n;
  }
  const auto r = rt.result();
  for (const auto& [id, n] : total) {
    const auto it = r.profiles.find({id, 1});
    c.expect(it != r.profiles.end() && it->second.visits == n, "visit count mismatch for region " + std::to_string(id));
  }
  const auto b = rt.balance();
  c.expect(b.begins == 10'000 && b.ends == 10'000 && b.unclosed == 0, "unbalanced trace");
  c.expect(r.unbalanced_regions.empty() && rt.diagnostics().empty(), "unexpected diagnostics");

  // Result file round trip on the aggregated trace, at microsecond resolution.
  RunResult quantized = r;
  for (auto& [key, p] : quantized.profiles) {
    p.total_ns = p.total_ns / 1000 * 1000;
    p.min_ns = p.min_ns / 1000 * 1000;
    p.max_ns = p.max_ns / 1000 * 1000;
  }
  c.expect(parse_result(emit_result(quantized)) == quantized, "result round trip is lossy");
  const auto doc = emit_result(r);
  c.expect(emit_result(parse_result(doc)) == doc, "result text is not a fixed point");
}

void advisor_oracle(Check& c) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    Dataset d;
    const std::size_t nf = 1 + rng() % 3;
    d.feature_names.clear();
    for (std::size_t f = 0; f < nf; ++f) d.feature_names.push_back("f" + std::to_string(f));
    const std::size_t n = 1 + rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      LabeledSample s;
      for (std::size_t f = 0; f < nf; ++f) s.features.push_back(static_cast<double>(rng() % 100) / 10);
      s.label = static_cast<SmtClass>(rng() % 3);
      d.samples.push_back(s);
    }
    auto impurity = [&](std::size_t f, double thr) {
      std::array<double, kNumClasses> l{}, r{};
      for (const auto& s : d.samples) (s.features[f] <= thr ? l : r)[static_cast<std::size_t>(s.label)] += 1;
      const double nl = l[0] + l[1] + l[2], nr = r[0] + r[1] + r[2];
      return (nl * gini(l) + nr * gini(r)) / (nl + nr);
    };
    std::optional<double> brute;
    for (std::size_t f = 0; f < nf; ++f) {
      std::vector<double> v;
      for (const auto& s : d.samples) v.push_back(s.features[f]);
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      for (std::size_t k = 0; k + 1 < v.size(); ++k) {
        const double imp = impurity(f, (v[k] + v[k + 1]) / 2);
        if (!brute || imp < *brute) brute = imp;
      }
    }
    TrainOptions o;
    o.max_depth = 1;
    const auto tree = train(d, o);
    std::array<double, kNumClasses> dist{};
    for (const auto& s : d.samples) dist[static_cast<std::size_t>(s.label)] += 1;
    const double root = gini(dist);
    if (tree.nodes[0].leaf) {
      c.expect(!brute || root == 0, "trial " + std::to_string(trial) + ": no split although one exists");
      continue;
    }
    const auto f = static_cast<std::size_t>(
        std::find(d.feature_names.begin(), d.feature_names.end(), tree.nodes[0].feature) - d.feature_names.begin());
    const double got = impurity(f, tree.nodes[0].threshold);
    c.expect(brute && std::abs(got - *brute) <= 1e-12, "trial " + std::to_string(trial) + ": split is not optimal");
  }

  // Separable fixtures: distinct feature points, labels from a hidden rule.
  TrainOptions unlimited;
  unlimited.max_depth = -1;
  for (int trial = 0; trial < 50; ++trial) {
    Dataset d;
    d.feature_names = {"a", "b"};
    for (int i = 0; i < 12; ++i) {
      const double a = i, b = static_cast<double>(rng() % 50);
      d.samples.push_back({{a, b}, a + b < 25 ? SmtClass::SMT1 : (b > 30 ? SmtClass::SMT4 : SmtClass::SMT2), 1});
    }
    c.expect(training_accuracy(train(d, unlimited), d) == 1.0, "separable fixture not learned");
  }
  const auto bots = parse_dataset(text::read_file(testsupport::data("bots.dataset")));
  const std::vector<SmtClass> labels = {SmtClass::SMT2, SmtClass::SMT4, SmtClass::SMT2, SmtClass::SMT2,
                                        SmtClass::SMT1};
  c.expect(bots.samples.size() == labels.size(), "benchmark fixture has the wrong size");
  for (std::size_t i = 0; i < std::min(labels.size(), bots.samples.size()); ++i) {
    c.expect(bots.samples[i].label == labels[i], "benchmark fixture label " + std::to_string(i));
  }
  c.expect(training_accuracy(train(bots, unlimited), bots) == 1.0, "benchmark fixture not classified perfectly");
}

void format_conformance(Check& c) {
  testsupport::TempDir dir;
  auto clock = std::make_shared<ManualClock>();
  RuntimeOptions opts;
  opts.clock = clock;
  opts.run_id = "acceptance";
  opts.provider = std::make_shared<SyntheticProvider>();
  Runtime rt(std::move(opts));
  for (RegionId id = 0; id < 4; ++id) {
    const auto t = rt.region_begin(id, 8 << (id % 2));
    clock->advance(1'000'000 * (id + 1));
    rt.region_end(t);
  }
  const auto stanzas = rt.result().profiles.size();

  auto env_of = [](const char* viz, const char* hpm) {
    return RuntimeEnv::from([=](const char* name) -> const char* {
      if (std::string(name) == "PDTTAGGER_VIZ_OUTPUT") return viz;
      if (std::string(name) == "HPM_VIZ_OUTPUT") return hpm;
      return nullptr;
    });
  };
  struct Case {
    const char* viz;
    const char* hpm;
    bool want_viz;
    bool want_counters;
  };
  const std::vector<Case> cases = {{nullptr, nullptr, false, false}, {"true", "yes", false, false},
                                   {"TRUE", nullptr, true, false},   {"TRUE", "Yes", true, false},
                                   {"TRUE", "yes", true, true}};
  int k = 0;
  for (const auto& cs : cases) {
    const auto out = dir / std::to_string(k++);
    rt.finalize(out, env_of(cs.viz, cs.hpm));
    c.expect(std::filesystem::exists(out / kResultFileName), "result file missing");
    const bool has_viz = std::filesystem::exists(out / kVizFileName);
    c.expect(has_viz == cs.want_viz, "viz presence does not follow PDTTAGGER_VIZ_OUTPUT");
    if (!has_viz) continue;
    const auto check = testsupport::check_xml(text::read_file(out / kVizFileName));
    c.expect(check.ok, "viz is not well-formed: " + check.error);
    const auto regions = check.element_counts.count("region") ? check.element_counts.at("region") : 0;
    c.expect(static_cast<std::size_t>(regions) == stanzas, "viz region count differs from stanza count");
    c.expect((check.element_counts.count("counter") > 0) == cs.want_counters,
             "counter section does not follow HPM_VIZ_OUTPUT");
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> checks = {
      {"SMT-mode argmin reproduction", smt_argmin},
      {"Derived speedups", speedups},
      {"Cost-model calibration", calibration},
      {"Instrumentation golden suite", golden_suite},
      {"Runtime state machine", runtime_state_machine},
      {"Advisor oracle equivalence", advisor_oracle},
      {"Format conformance", format_conformance},
  };
  int failed = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, fn] : checks) {
    Check c;
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.failure = std::string("exception: ") + e.what();
    }
    if (c.failure.empty()) {
      std::cout << "PASS " << name << '\n';
    } else {
      std::cout << "FAIL " << name << ": " << c.failure << '\n';
      ++failed;
    }
  }
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << " in "
            << text::format_fixed(secs, 2) << "s\n";
  return failed == 0 ? 0 : 1;
}
