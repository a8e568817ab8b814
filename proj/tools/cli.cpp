#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pdttagger/pdttagger.hpp"

#ifndef PDTTAGGER_INCLUDE_DIR
#define PDTTAGGER_INCLUDE_DIR "include"
#endif
#ifndef PDTTAGGER_LIB_DIR
#define PDTTAGGER_LIB_DIR "lib"
#endif

namespace fs = std::filesystem;

namespace pdttagger::cli {
namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::AlreadyInstrumented:
    case ErrorCode::RegionNotFound:
    case ErrorCode::UnsupportedLayout:
      return kInstrumentationConflict;
    case ErrorCode::InsufficientTrials:
    case ErrorCode::DegenerateFit:
    case ErrorCode::TrialFailed:
      return kTuningInfeasible;
    case ErrorCode::IoFailure:
    case ErrorCode::WindowMisuse:
      return kIoError;
    default:
      return kInputError;
  }
}

struct Scanned {
  std::vector<std::string> files;  // sorted input paths
  std::map<std::string, std::string> sources;
  std::vector<Region> regions;  // ids continue across files
};

Scanned scan_files(std::vector<std::string> paths) {
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  Scanned s;
  s.files = paths;
  for (const auto& p : paths) {
    auto src = text::read_file(p);
    auto regions = scan_source(src, p, static_cast<RegionId>(s.regions.size()));
    s.regions.insert(s.regions.end(), regions.begin(), regions.end());
    s.sources.emplace(p, std::move(src));
  }
  return s;
}

std::vector<Region> apply_config(const std::vector<Region>& regions, const std::string& config_path,
                                 std::ostream& err) {
  if (config_path.empty()) return regions;
  const auto cfg = parse_config(text::read_file(config_path));
  Diagnostics warnings;
  auto selected = select_regions(regions, cfg, &warnings);
  for (const auto& w : warnings) err << "warning: " << w.message << '\n';
  return selected;
}

void print_diagnostics(const Diagnostics& d, std::ostream& err) {
  for (const auto& x : d) err << "warning: " << x.code << ": " << x.message << '\n';
}

std::string wrapper_script() {
  std::ostringstream os;
  os << "#!/bin/sh\n"
     << "# Compiles instrumented sources and links the pdttagger hook library.\n"
     << "# Use as CC in a Makefile; PDTTAGGER_CC selects the underlying compiler.\n"
     << "exec \"${PDTTAGGER_CC:-cc}\" -fopenmp -I\"" << PDTTAGGER_INCLUDE_DIR << "\" \"$@\" -L\"" << PDTTAGGER_LIB_DIR
     << "\" -lpdttagger_rt -lstdc++ -lpthread\n";
  return os.str();
}

// ---------------------------------------------------------------------------

struct RegionsArgs {
  std::vector<std::string> sources;
  std::string config;
};

int cmd_regions(const RegionsArgs& a, std::ostream& out, std::ostream& err) {
  const auto scanned = scan_files(a.sources);
  const auto selected = apply_config(scanned.regions, a.config, err);
  for (const auto& r : selected) {
    out << r.id << ' ' << to_string(r.kind) << ' ' << r.file << ':' << r.pragma_line << '-' << r.block_end << ' '
        << (r.function.empty() ? "-" : r.function) << '\n';
  }
  out << selected.size() << (selected.size() == 1 ? " region" : " regions") << '\n';
  return kOk;
}

struct InstrumentArgs {
  std::vector<std::string> sources;
  std::string config;
  std::string out_dir;
  bool no_thread_clause = false;
  bool emit_wrapper = false;
};

int cmd_instrument(const InstrumentArgs& a, std::ostream& out, std::ostream& err) {
  const auto scanned = scan_files(a.sources);
  const auto selected = apply_config(scanned.regions, a.config, err);
  InstrumentationOptions opts;
  opts.inject_thread_clause = !a.no_thread_clause;

  std::set<std::string> names;
  for (const auto& f : scanned.files) {
    if (!names.insert(text::basename(f)).second) {
      throw Error(ErrorCode::InvalidArgument, "two inputs share the file name " + text::basename(f));
    }
  }

  // Transform everything before writing anything.
  std::vector<std::pair<fs::path, std::string>> outputs;
  RegionManifest merged;
  std::vector<std::string_view> texts;
  for (const auto& f : scanned.files) {
    const auto& src = scanned.sources.at(f);
    std::vector<Region> mine;
    for (const auto& r : selected) {
      if (r.file == f) mine.push_back(r);
    }
    auto res = instrument(src, mine, opts);
    outputs.emplace_back(fs::path(a.out_dir) / text::basename(f), std::move(res.text));
    merged.entries.insert(merged.entries.end(), mine.begin(), mine.end());
    texts.push_back(src);
  }
  merged.source_digest = source_digest(texts);

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + a.out_dir);
  for (const auto& f : scanned.files) {
    const auto target = fs::path(a.out_dir) / text::basename(f);
    if (fs::exists(target) && fs::equivalent(target, f)) {
      throw Error(ErrorCode::InvalidArgument, "--out-dir would overwrite the input " + f);
    }
  }
  for (const auto& [path, content] : outputs) {
    text::write_file_atomic(path, content);
    out << "wrote " << path.string() << '\n';
  }
  const auto manifest_path = fs::path(a.out_dir) / "pdttagger.manifest";
  text::write_file_atomic(manifest_path, emit_manifest(merged));
  out << "wrote " << manifest_path.string() << " (" << merged.entries.size() << " regions)\n";
  if (a.emit_wrapper) {
    const auto wrapper = fs::path(a.out_dir) / "pdtcc";
    text::write_file_atomic(wrapper, wrapper_script());
    fs::permissions(wrapper, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                    fs::perm_options::add, ec);
    out << "wrote " << wrapper.string() << '\n';
  }
  return kOk;
}

struct StripArgs {
  std::string input;
  std::string output;
};

int cmd_strip(const StripArgs& a, std::ostream& out) {
  const auto stripped = strip(text::read_file(a.input));
  if (a.output.empty()) {
    out << stripped;
  } else {
    text::write_file_atomic(a.output, stripped);
  }
  return kOk;
}

struct RunArgs {
  std::string exec;
  std::string model;
  int threads = 0;
  int visits = 1;
  std::string plan;
  std::string manifest;
  std::string out_dir = ".";
  bool viz = false;
  bool hpm_viz = false;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  auto env = RuntimeEnv::from_process();
  env.out_dir = a.out_dir;
  env.viz = env.viz || a.viz;
  env.hpm_viz = env.hpm_viz || a.hpm_viz;

  if (!a.exec.empty()) {
    if (!a.plan.empty()) ::setenv("PDTTAGGER_PLAN", fs::absolute(a.plan).c_str(), 1);
    if (!a.manifest.empty()) ::setenv("PDTTAGGER_MANIFEST", fs::absolute(a.manifest).c_str(), 1);
    ::setenv("PDTTAGGER_OUT", a.out_dir.c_str(), 1);
    if (env.viz) ::setenv("PDTTAGGER_VIZ_OUTPUT", "TRUE", 1);
    if (env.hpm_viz) ::setenv("HPM_VIZ_OUTPUT", "yes", 1);
    const int status = std::system(a.exec.c_str());
    if (status != 0) {
      err << "pdttagger: command " << describe_status(status) << '\n';
      return kIoError;
    }
    const auto result_path = fs::path(a.out_dir) / kResultFileName;
    out << render_text_report(parse_result(text::read_file(result_path)));
    return kOk;
  }

  const auto model = parse_cost_model(text::read_file(a.model));
  RuntimeOptions opts;
  if (!a.plan.empty()) opts.plan = parse_plan(text::read_file(a.plan));
  if (a.threads > 0) opts.plan.default_threads = a.threads;
  if (!a.manifest.empty()) opts.manifest = parse_manifest(text::read_file(a.manifest));
  auto clock = std::make_shared<ManualClock>();
  opts.clock = clock;
  opts.provider = std::make_shared<SyntheticProvider>();
  opts.run_id = "model";
  Runtime rt(std::move(opts));
  for (const auto& [id, p] : model.regions) {
    const int n = rt.region_threads(id);
    const auto ns = static_cast<std::int64_t>(std::llround(model_time(p, model.cores, n) * 1e9));
    for (int v = 0; v < a.visits; ++v) {
      const auto tok = rt.region_begin(id);
      clock->advance(ns);
      rt.region_end(tok);
    }
  }
  print_diagnostics(rt.diagnostics(), err);
  for (const auto& p : rt.finalize(a.out_dir, env)) out << "wrote " << p.string() << '\n';
  out << render_text_report(rt.result());
  return kOk;
}

struct TuneArgs {
  std::string candidates;
  int cores = 0;
  bool include_one = false;
  std::string exec;
  std::string model;
  std::string observations;
  std::string trials_in;
  std::string trials_out;
  std::string plan_out;
  std::string model_out;
  std::string work_dir = "pdttagger-trials";
  int visits = 1;
};

int cmd_tune(const TuneArgs& a, std::ostream& out, std::ostream& err) {
  std::map<RegionId, std::string> names;
  std::vector<TrialResult> trials;
  // Exclusions are reported even when too few trials survive.
  auto run_all = [&](TrialExecutor& exec, const CandidateSet& set) {
    Diagnostics exclusions;
    try {
      trials = run_trials(exec, {}, set, &exclusions);
    } catch (const Error&) {
      for (const auto& d : exclusions) err << "warning: " << d.message << '\n';
      throw;
    }
    for (const auto& d : exclusions) err << "warning: " << d.message << '\n';
  };

  auto candidates_for = [&](int cores) {
    if (!a.candidates.empty()) return CandidateSet::parse(a.candidates);
    if (cores < 1) throw Error(ErrorCode::InvalidArgument, "--cores is required when --candidates is not given");
    return CandidateSet::from_cores(cores, a.include_one);
  };

  if (!a.trials_in.empty()) {
    trials = parse_trials(text::read_file(a.trials_in));
  } else if (!a.exec.empty()) {
    CommandExecutor exec(a.exec, a.work_dir);
    run_all(exec, candidates_for(a.cores));
  } else {
    CostModel model;
    if (!a.observations.empty()) {
      const auto obs = parse_observations(text::read_file(a.observations));
      model.cores = obs.cores;
      model.names = obs.names;
      for (const auto& [id, series] : obs.times) {
        const auto fit = fit_cost_model(series, obs.cores);
        model.regions[id] = fit.params;
        out << "fit region " << id;
        if (auto it = obs.names.find(id); it != obs.names.end()) out << " (" << it->second << ")";
        out << ": max relative error ";
        double worst = 0;
        for (const auto& [n, e] : fit.relative_error) worst = std::max(worst, std::abs(e));
        out << text::format_fixed(worst, 6) << '\n';
      }
      if (!a.model_out.empty()) text::write_file_atomic(a.model_out, emit_cost_model(model));
    } else if (!a.model.empty()) {
      model = parse_cost_model(text::read_file(a.model));
    } else {
      throw Error(ErrorCode::InvalidArgument, "one of --exec, --model, --observations or --trials is required");
    }
    names = model.names;
    ModelExecutor exec(model, a.visits);
    run_all(exec, candidates_for(a.cores > 0 ? a.cores : model.cores));
  }

  Diagnostics warnings;
  const auto plan = build_plan(trials, &warnings);
  print_diagnostics(warnings, err);

  auto sorted = trials;
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.candidate < y.candidate; });
  const auto& base = sorted.front();
  for (const auto& [id, n] : plan.overrides) {
    out << "region " << id;
    if (auto it = names.find(id); it != names.end()) out << " (" << it->second << ")";
    out << " -> " << n << " threads;";
    for (const auto& t : sorted) {
      const auto it = t.mean_time.find(id);
      if (it == t.mean_time.end()) continue;
      out << ' ' << t.candidate << ':' << text::format_fixed(it->second, 6) << 's';
      if (auto b = base.mean_time.find(id); b != base.mean_time.end() && b->second > 0 && it->second > 0) {
        out << " (x" << text::format_fixed(speedup(b->second, it->second), 3) << ')';
      }
    }
    out << '\n';
  }
  out << "default -> " << plan.default_threads << " threads\n";

  if (!a.trials_out.empty()) text::write_file_atomic(a.trials_out, emit_trials(trials));
  if (!a.plan_out.empty()) {
    text::write_file_atomic(a.plan_out, emit_plan(plan));
    out << "wrote " << a.plan_out << '\n';
  }
  return kOk;
}

struct TrainArgs {
  std::string data;
  int max_depth = 4;
  std::size_t min_samples_leaf = 1;
  std::string out;
  double holdout = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  auto data = parse_dataset(text::read_file(a.data));
  Dataset test;
  test.feature_names = data.feature_names;
  if (a.holdout > 0) {
    if (a.holdout >= 1) throw Error(ErrorCode::InvalidArgument, "--holdout must be in [0, 1)");
    const auto keep = static_cast<std::size_t>(
        std::max<double>(1, std::floor(static_cast<double>(data.samples.size()) * (1 - a.holdout))));
    if (keep < data.samples.size()) {
      test.samples.assign(data.samples.begin() + static_cast<std::ptrdiff_t>(keep), data.samples.end());
      data.samples.resize(keep);
    }
  }
  const auto tree = train(data, {a.max_depth, a.min_samples_leaf});
  auto pct = [](double acc) { return text::format_fixed(acc * 100, 2) + "%"; };
  const auto acc = training_accuracy(tree, data);
  out << "training accuracy: " << pct(acc) << " (" << data.samples.size() << " samples, depth " << tree.depth()
      << ")\n";
  if (!test.samples.empty()) {
    out << "holdout accuracy: " << pct(training_accuracy(tree, test)) << " (" << test.samples.size()
        << " samples)\n";
  }
  if (!a.out.empty()) {
    text::write_file_atomic(a.out, export_tree(tree));
    out << "wrote " << a.out << '\n';
  }
  return kOk;
}

struct PredictArgs {
  std::string tree;
  std::string features;
  std::string result_file;
  int cores = 0;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  const auto tree = import_tree(text::read_file(a.tree));
  auto show = [&](SmtClass c) {
    out << to_string(c);
    if (a.cores > 0) out << " -> " << recommend_threads(c, a.cores) << " threads";
    out << '\n';
  };
  if (!a.features.empty()) {
    std::vector<std::string> names;
    std::vector<double> values;
    for (auto item : text::split(a.features, ',')) {
      const auto kv = text::split(text::trim(item), '=');
      const auto v = kv.size() == 2 ? text::parse_double(text::trim(kv[1])) : std::nullopt;
      if (!v) throw Error(ErrorCode::InvalidArgument, "expected name=value, got '" + std::string(item) + "'");
      names.emplace_back(text::trim(kv[0]));
      values.push_back(*v);
    }
    show(predict(tree, names, values));
    return kOk;
  }
  if (a.result_file.empty()) throw Error(ErrorCode::InvalidArgument, "one of --features or --result-file is required");
  const auto result = parse_result(text::read_file(a.result_file));
  for (const auto& [key, p] : result.profiles) {
    out << "region " << p.region_id << " threads " << p.thread_count << ": ";
    try {
      show(predict(tree, derive_features(p)));
    } catch (const Error& e) {
      out << "no prediction\n";
      err << "warning: " << e.what() << '\n';
    }
  }
  return kOk;
}

struct ReportArgs {
  std::string result;
  std::string format = "text";
  std::string manifest;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto result = parse_result(text::read_file(a.result));
  if (a.format == "xml") {
    std::optional<RegionManifest> manifest;
    if (!a.manifest.empty()) manifest = parse_manifest(text::read_file(a.manifest));
    VizOptions vo;
    vo.include_counters = true;
    if (manifest) vo.regions = &manifest->entries;
    out << emit_viz(result, vo);
  } else {
    out << render_text_report(result);
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pdttagger: OpenMP region instrumentation, profiling and thread-count tuning", "pdttagger"};
  app.require_subcommand(1);
  app.allow_extras(false);

  RegionsArgs regions;
  auto* sc_regions = app.add_subcommand("regions", "List instrumentable OpenMP regions");
  sc_regions->add_option("sources", regions.sources, "C source files")->required()->check(CLI::ExistingFile);
  sc_regions->add_option("--config", regions.config, "Region selection file")->check(CLI::ExistingFile);

  InstrumentArgs instr;
  auto* sc_instr = app.add_subcommand("instrument", "Write instrumented copies and a region manifest");
  sc_instr->add_option("sources", instr.sources, "C source files")->required()->check(CLI::ExistingFile);
  sc_instr->add_option("--config", instr.config, "Region selection file")->check(CLI::ExistingFile);
  sc_instr->add_option("--out-dir", instr.out_dir, "Output directory")->required();
  sc_instr->add_flag("--no-thread-clause", instr.no_thread_clause, "Do not inject num_threads clauses");
  sc_instr->add_flag("--emit-wrapper", instr.emit_wrapper, "Also write the pdtcc compiler wrapper");

  StripArgs strip_args;
  auto* sc_strip = app.add_subcommand("strip", "Remove instrumentation from a file");
  sc_strip->add_option("input", strip_args.input, "Instrumented file")->required()->check(CLI::ExistingFile);
  sc_strip->add_option("--out", strip_args.output, "Output path (default: standard output)");

  RunArgs run_args;
  auto* sc_run = app.add_subcommand("run", "Run an instrumented program, or simulate one from a cost model");
  auto* run_exec = sc_run->add_option("--exec", run_args.exec, "Shell command of the instrumented program");
  auto* run_model = sc_run->add_option("--model", run_args.model, "Cost model file to simulate")
                        ->check(CLI::ExistingFile);
  run_exec->excludes(run_model);
  sc_run->add_option("--threads", run_args.threads, "Default thread count for a simulated run")
      ->check(CLI::PositiveNumber);
  sc_run->add_option("--visits", run_args.visits, "Visits per region in a simulated run")->check(CLI::PositiveNumber);
  sc_run->add_option("--plan", run_args.plan, "Thread plan file")->check(CLI::ExistingFile);
  sc_run->add_option("--manifest", run_args.manifest, "Region manifest")->check(CLI::ExistingFile);
  sc_run->add_option("--out-dir", run_args.out_dir, "Directory for result files");
  sc_run->add_flag("--viz", run_args.viz, "Write the viz file (same as PDTTAGGER_VIZ_OUTPUT=TRUE)");
  sc_run->add_flag("--hpm-viz", run_args.hpm_viz, "Include counters in the viz file (same as HPM_VIZ_OUTPUT=yes)");

  TuneArgs tune;
  auto* sc_tune = app.add_subcommand("tune", "Search thread counts per region and write a plan");
  sc_tune->add_option("--candidates", tune.candidates, "Comma-separated thread counts, e.g. 32,64,128");
  sc_tune->add_option("--cores", tune.cores, "Core count C for the default [C,2C,4C] candidates")
      ->check(CLI::PositiveNumber);
  sc_tune->add_flag("--include-one", tune.include_one, "Prepend 1 to the generated candidates");
  auto* t_exec = sc_tune->add_option("--exec", tune.exec, "Command template ({threads}, {out} placeholders)");
  auto* t_model = sc_tune->add_option("--model", tune.model, "Cost model file")->check(CLI::ExistingFile);
  auto* t_obs = sc_tune->add_option("--observations", tune.observations, "Timings to fit a cost model to")
                    ->check(CLI::ExistingFile);
  auto* t_trials = sc_tune->add_option("--trials", tune.trials_in, "Replay an existing tuning database")
                       ->check(CLI::ExistingFile);
  t_exec->excludes(t_model, t_obs, t_trials);
  t_model->excludes(t_obs, t_trials);
  t_obs->excludes(t_trials);
  sc_tune->add_option("--trials-out", tune.trials_out, "Write the tuning database here");
  sc_tune->add_option("--plan-out", tune.plan_out, "Write the thread plan here");
  sc_tune->add_option("--model-out", tune.model_out, "Write the fitted cost model here");
  sc_tune->add_option("--work-dir", tune.work_dir, "Directory for --exec trial outputs");
  sc_tune->add_option("--visits", tune.visits, "Visits per region in simulated trials")->check(CLI::PositiveNumber);

  TrainArgs train_args;
  auto* sc_train = app.add_subcommand("train", "Train the SMT advisor decision tree");
  sc_train->add_option("--data", train_args.data, "Dataset file")->required()->check(CLI::ExistingFile);
  sc_train->add_option("--max-depth", train_args.max_depth, "Maximum depth (negative: unlimited)");
  sc_train->add_option("--min-samples-leaf", train_args.min_samples_leaf, "Minimum samples per leaf")
      ->check(CLI::PositiveNumber);
  sc_train->add_option("--out", train_args.out, "Tree output file");
  sc_train->add_option("--holdout", train_args.holdout, "Fraction of trailing samples held out for evaluation");

  PredictArgs predict_args;
  auto* sc_predict = app.add_subcommand("predict", "Predict the SMT class for features or a result file");
  sc_predict->add_option("--tree", predict_args.tree, "Tree file")->required()->check(CLI::ExistingFile);
  auto* p_feat = sc_predict->add_option("--features", predict_args.features, "name=value,... feature list");
  auto* p_res = sc_predict->add_option("--result-file", predict_args.result_file, "Result file with counters")
                    ->check(CLI::ExistingFile);
  p_feat->excludes(p_res);
  sc_predict->add_option("--cores", predict_args.cores, "Also print the recommended thread count")
      ->check(CLI::PositiveNumber);

  ReportArgs report_args;
  auto* sc_report = app.add_subcommand("report", "Render a result file");
  sc_report->add_option("--result", report_args.result, "Result file")->required()->check(CLI::ExistingFile);
  sc_report->add_option("--format", report_args.format, "text or xml")
      ->check(CLI::IsMember({"text", "xml"}));
  sc_report->add_option("--manifest", report_args.manifest, "Manifest for region attributes in xml")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "pdttagger: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (*sc_regions) return cmd_regions(regions, out, err);
    if (*sc_instr) return cmd_instrument(instr, out, err);
    if (*sc_strip) return cmd_strip(strip_args, out);
    if (*sc_run) {
      if (run_args.exec.empty() && run_args.model.empty()) {
        throw Error(ErrorCode::InvalidArgument, "one of --exec or --model is required");
      }
      return cmd_run(run_args, out, err);
    }
    if (*sc_tune) return cmd_tune(tune, out, err);
    if (*sc_train) return cmd_train(train_args, out);
    if (*sc_predict) return cmd_predict(predict_args, out, err);
    if (*sc_report) return cmd_report(report_args, out);
  } catch (const Error& e) {
    err << "pdttagger: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "pdttagger: " << e.what() << '\n';
    return kIoError;
  }
  return kInputError;
}

}  // namespace pdttagger::cli
