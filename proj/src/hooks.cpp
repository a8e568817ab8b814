// C entry points for instrumented programs, backed by pdttagger::Runtime.
//
// Configuration comes from the environment on first use: PDTTAGGER_PLAN,
// PDTTAGGER_MANIFEST, PDTTAGGER_OUT, PDTTAGGER_VIZ_OUTPUT, HPM_VIZ_OUTPUT,
// PDTTAGGER_COUNTERS ("synthetic" attaches the deterministic provider).
// Without a plan, the default team size is OMP_NUM_THREADS when set, else
// the hardware concurrency.

#include "pdttagger_hooks.h"

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <thread>

#include "pdttagger/runtime.hpp"

namespace {

struct State {
  pdttagger::RuntimeEnv env;
  std::unique_ptr<pdttagger::Runtime> runtime;
  std::once_flag finalized;
};

int fallback_threads() {
  if (const char* v = std::getenv("OMP_NUM_THREADS")) {
    // OMP_NUM_THREADS may be a nesting list such as "8,4"; take the first.
    const auto first = pdttagger::text::split(v, ',').front();
    if (const auto n = pdttagger::text::parse_int<int>(pdttagger::text::trim(first)); n && *n > 0) return *n;
  }
  const auto hw = static_cast<int>(std::thread::hardware_concurrency());
  return hw > 0 ? hw : 1;
}

void report(const char* what) { std::fprintf(stderr, "pdttagger: %s\n", what); }

void finalize_state();

State& state() {
  static State* s = [] {
    auto* st = new State;
    st->env = pdttagger::RuntimeEnv::from_process();
    pdttagger::RuntimeOptions opts;
    opts.plan.default_threads = fallback_threads();
    if (st->env.plan_path) {
      try {
        opts.plan = pdttagger::parse_plan(pdttagger::text::read_file(*st->env.plan_path));
      } catch (const pdttagger::Error& e) {
        report(e.what());
      }
    }
    if (st->env.manifest_path) {
      try {
        opts.manifest = pdttagger::parse_manifest(pdttagger::text::read_file(*st->env.manifest_path));
      } catch (const pdttagger::Error& e) {
        report(e.what());
      }
    }
    if (st->env.counters == "synthetic") {
      opts.provider = std::make_shared<pdttagger::SyntheticProvider>();
    } else if (!st->env.counters.empty()) {
      report(("unknown counter provider '" + st->env.counters + "'; counting disabled").c_str());
    }
    st->runtime = std::make_unique<pdttagger::Runtime>(std::move(opts));
    std::atexit(finalize_state);
    return st;
  }();
  return *s;
}

void finalize_state() {
  auto& s = state();
  std::call_once(s.finalized, [&] {
    try {
      s.runtime->finalize(s.env.out_dir, s.env);
    } catch (const pdttagger::Error& e) {
      report(e.what());
    }
  });
}

}  // namespace

extern "C" {

void pdt_region_begin(int region_id) { state().runtime->region_begin(region_id); }

void pdt_region_end(int region_id) { state().runtime->region_end_innermost(region_id); }

int pdt_region_threads(int region_id) { return state().runtime->region_threads(region_id); }

void pdt_finalize(void) { finalize_state(); }

}  // extern "C"
