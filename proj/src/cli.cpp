#include "rlsim/cli.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace rlsim {

// ---- small parsers ------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& value, const std::string& key, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || errno != 0 || end != value.c_str() + value.size())
    throw config_error(where + ": " + key + " expects an integer, got \"" + value + "\"");
  return v;
}

uint64_t parse_uint(const std::string& value, const std::string& key, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || errno != 0 || end != value.c_str() + value.size() || value[0] == '-')
    throw config_error(where + ": " + key + " expects a nonnegative integer, got \"" + value +
                       "\"");
  return v;
}

double parse_real(const std::string& value, const std::string& key, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || errno != 0 || end != value.c_str() + value.size() || !std::isfinite(v))
    throw config_error(where + ": " + key + " expects a finite number, got \"" + value + "\"");
  return v;
}

std::vector<int64_t> parse_seed_list(const std::string& value, const std::string& key,
                                     const std::string& where) {
  std::vector<int64_t> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_int(trim(item), key, where));
  if (out.empty()) throw config_error(where + ": " + key + " expects at least one seed");
  return out;
}

template <typename Fn>
auto checked(Fn fn, const std::string& key, const std::string& value, const std::string& where) {
  try {
    return fn(value);
  } catch (const std::invalid_argument& e) {
    throw config_error(where + ": " + key + ": " + e.what());
  }
}

}  // namespace

// ---- config keys ----------------------------------------------------------------

void apply_config_key(experiment_spec& spec, const std::string& key, const std::string& value,
                      const std::string& where) {
  if (key == "preset") {
    spec.preset = checked(preset_from_string, key, value, where);
  } else if (key == "task.class") {
    spec.task.cls = checked(policy_class_from_string, key, value, where);
  } else if (key == "task.vocab_size") {
    spec.task.vocab.size = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "task.max_len") {
    spec.task.vocab.max_len = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "task.num_test_tasks") {
    spec.task.num_test_tasks = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "task.answers_per_task") {
    spec.task.answers_per_task = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "task.feature_overlap") {
    spec.task.feature_overlap = parse_real(value, key, where);
  } else if (key == "task.difficulty_target") {
    spec.task.difficulty_target = parse_real(value, key, where);
  } else if (key == "task.metric") {
    spec.task.metric = checked(reward_metric_from_string, key, value, where);
  } else if (key == "task.file") {
    spec.task_file = value;
  } else if (key == "task.seed") {
    spec.task_seed = parse_uint(value, key, where);
  } else if (key == "trainer.group_size") {
    spec.trainer.group_size = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "trainer.clip_epsilon") {
    spec.trainer.clip_epsilon = parse_real(value, key, where);
  } else if (key == "trainer.kl_coef") {
    spec.trainer.kl_coef = parse_real(value, key, where);
  } else if (key == "trainer.advantage") {
    spec.trainer.advantage = checked(advantage_mode_from_string, key, value, where);
  } else if (key == "trainer.signal") {
    spec.trainer.signal = checked(signal_source_from_string, key, value, where);
  } else if (key == "trainer.inner_epochs") {
    spec.trainer.inner_epochs = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "trainer.kl_estimator") {
    spec.trainer.kl_est = checked(kl_estimator_from_string, key, value, where);
  } else if (key == "trainer.aggregation") {
    if (value != "mean_over_tokens_then_rollouts")
      throw config_error(where + ": trainer.aggregation only supports "
                                 "mean_over_tokens_then_rollouts, got \"" +
                         value + "\"");
  } else if (key == "trainer.optimizer") {
    spec.trainer.opt.kind = checked(optimizer_kind_from_string, key, value, where);
  } else if (key == "trainer.learning_rate") {
    spec.trainer.opt.learning_rate = parse_real(value, key, where);
  } else if (key == "trainer.beta2") {
    spec.trainer.opt.beta2 = parse_real(value, key, where);
  } else if (key == "trainer.optimizer_eps") {
    spec.trainer.opt.eps = parse_real(value, key, where);
  } else if (key == "trainer.temperature") {
    spec.trainer.decoding.temperature = parse_real(value, key, where);
  } else if (key == "trainer.top_p") {
    spec.trainer.decoding.top_p = parse_real(value, key, where);
  } else if (key == "eval.n_train_samples") {
    spec.eval.n_train_samples = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "eval.convergence_threshold") {
    spec.eval.convergence_threshold = parse_real(value, key, where);
  } else if (key == "eval.convergence_patience") {
    spec.eval.convergence_patience = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "eval.eval_every") {
    spec.eval.eval_every = static_cast<int32_t>(parse_int(value, key, where));
  } else if (key == "run.horizon") {
    spec.horizon = parse_int(value, key, where);
  } else if (key == "run.grace") {
    spec.grace = parse_int(value, key, where);
  } else if (key == "run.seeds") {
    spec.seeds = parse_seed_list(value, key, where);
  } else if (key == "run.master_seed") {
    spec.master_seed = parse_uint(value, key, where);
  } else {
    throw config_error(where + ": unknown key \"" + key + "\"");
  }
}

experiment_spec parse_config_text(const std::string& text, const experiment_spec& base) {
  struct entry {
    int line;
    std::string key, value;
  };
  std::vector<entry> entries;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(lineno) + ": expected key=value, got \"" +
                         line + "\"");
    entries.push_back({lineno, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }

  // a preset key rebases the whole spec, so it is applied before everything
  experiment_spec spec = base;
  for (const entry& e : entries)
    if (e.key == "preset") {
      try {
        spec = spec_from_preset(preset_from_string(e.value));
      } catch (const std::invalid_argument& err) {
        throw config_error("line " + std::to_string(e.line) + ": " + err.what());
      }
    }
  for (const entry& e : entries) {
    if (e.key == "preset") continue;
    apply_config_key(spec, e.key, e.value, "line " + std::to_string(e.line));
  }
  return spec;
}

// ---- command implementations ------------------------------------------------------

namespace {

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw config_error("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// flag values shared by run and sweep
struct cli_options {
  std::string preset;
  std::string config_path;
  std::string seeds;
  int64_t horizon = 0;
  int32_t group_size = 0;
  std::string advantage;
  std::string signal;
  std::string metric;
  std::string policy;
  double difficulty = 0.0;
  std::string out;
  int32_t workers = -1;
  uint64_t master_seed = 0;
  std::string targets;  // sweep only
  bool dump_config_only = false;
};

void add_common_flags(CLI::App* sub, cli_options& o) {
  sub->add_option("--preset", o.preset, "experiment preset (exp1..exp6, custom)");
  sub->add_option("--config", o.config_path, "key=value config file applied over the preset");
  sub->add_option("--seeds", o.seeds,
                  "seed count (e.g. 5 means seeds 0..4) or explicit comma list (e.g. 0,3,7)");
  sub->add_option("--horizon", o.horizon, "max training rounds per seed");
  sub->add_option("--group-size", o.group_size, "rollouts per round (G)");
  sub->add_option("--advantage", o.advantage, "advantage mode: reward | grpo");
  sub->add_option("--signal", o.signal, "surrogate signal source: all | first");
  sub->add_option("--metric", o.metric, "reward metric: 01 | neg10");
  sub->add_option("--difficulty", o.difficulty, "train-task base pass@1 target");
  sub->add_option("--policy", o.policy, "policy class: bandit | shared | autoreg");
  sub->add_option("--out", o.out, "output directory (default: $RLFT_SIM_OUT or ./rlsim-out)");
  sub->add_option("--workers", o.workers, "parallel seed workers (0 = hardware threads)");
  sub->add_option("--master-seed", o.master_seed, "root seed for per-seed stream derivation");
  sub->add_flag("--dump-config", o.dump_config_only,
                "print the resolved config and exit without running");
}

std::string short_metric_to_canonical(const std::string& s) {
  if (s == "01") return "zero_one";
  if (s == "neg10") return "neg_one_zero";
  throw config_error("--metric expects 01 or neg10, got \"" + s + "\"");
}

std::string short_policy_to_canonical(const std::string& s) {
  if (s == "bandit") return "independent_bandit";
  if (s == "shared") return "shared_feature_linear";
  if (s == "autoreg") return "autoregressive_tabular";
  throw config_error("--policy expects bandit, shared, or autoreg, got \"" + s + "\"");
}

std::vector<int64_t> seeds_from_flag(const std::string& value) {
  if (value.find(',') != std::string::npos)
    return parse_seed_list(value, "--seeds", "flag");
  const int64_t n = parse_int(value, "--seeds", "flag");
  if (n < 1) throw config_error("--seeds count must be >= 1, got " + value);
  std::vector<int64_t> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = i;
  return out;
}

experiment_spec build_spec(const CLI::App* sub, const cli_options& o) {
  preset_id p = preset_id::exp1;
  if (sub->count("--preset")) {
    try {
      p = preset_from_string(o.preset);
    } catch (const std::invalid_argument& e) {
      throw config_error(e.what());
    }
  }
  experiment_spec spec = spec_from_preset(p);
  if (sub->count("--config")) spec = parse_config_text(slurp_file(o.config_path), spec);

  const std::string where = "flag";
  if (sub->count("--horizon"))
    apply_config_key(spec, "run.horizon", std::to_string(o.horizon), where);
  if (sub->count("--group-size"))
    apply_config_key(spec, "trainer.group_size", std::to_string(o.group_size), where);
  if (sub->count("--advantage")) apply_config_key(spec, "trainer.advantage", o.advantage, where);
  if (sub->count("--signal")) apply_config_key(spec, "trainer.signal", o.signal, where);
  if (sub->count("--metric"))
    apply_config_key(spec, "task.metric", short_metric_to_canonical(o.metric), where);
  if (sub->count("--difficulty")) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", o.difficulty);
    apply_config_key(spec, "task.difficulty_target", buf, where);
  }
  if (sub->count("--policy"))
    apply_config_key(spec, "task.class", short_policy_to_canonical(o.policy), where);
  if (sub->count("--master-seed"))
    apply_config_key(spec, "run.master_seed", std::to_string(o.master_seed), where);
  if (sub->count("--seeds")) spec.seeds = seeds_from_flag(o.seeds);
  if (sub->count("--workers")) spec.workers = o.workers;

  if (sub->count("--out"))
    spec.out_dir = o.out;
  else if (const char* env = std::getenv("RLFT_SIM_OUT"); env != nullptr && env[0] != '\0')
    spec.out_dir = env;
  else
    spec.out_dir = "rlsim-out";
  return spec;
}

// overrides that leave a named preset's design are legal; the run just loses
// the preset label so the one-change bookkeeping stays truthful
void reconcile_preset(experiment_spec& spec) {
  if (spec.preset == preset_id::custom) return;
  try {
    assert_preset_consistency(spec);
  } catch (const std::invalid_argument& e) {
    std::cerr << "note: " << e.what() << "; running as custom\n";
    spec.preset = preset_id::custom;
  }
}

void print_report_table(std::ostream& out, const nlohmann::json& rj) {
  out << "preset " << rj.at("preset").get<std::string>() << "  spec "
      << rj.at("spec_hash").get<std::string>();
  if (rj.at("partial").get<bool>()) out << "  [PARTIAL]";
  out << "\n";
  std::fprintf(stdout, "%-14s %10s %8s %10s %13s %12s\n", "run_id", "converged", "rounds",
               "rollouts", "final_train", "final_test");
  for (const auto& run : rj.at("runs")) {
    const std::string run_id = run.at("run_id").get<std::string>();
    std::string conv = "-";
    if (!run.at("converged_round").is_null())
      conv = std::to_string(run.at("converged_round").get<int64_t>());
    double ftr = std::numeric_limits<double>::quiet_NaN(), fte = ftr;
    if (run.contains("final")) {
      ftr = run.at("final").at("train_pass1").get<double>();
      fte = run.at("final").at("test_pass1").get<double>();
    }
    std::fprintf(stdout, "%-14s %10s %8lld %10lld %13.4f %12.4f\n", run_id.c_str(), conv.c_str(),
                 static_cast<long long>(run.at("rounds_executed").get<int64_t>()),
                 static_cast<long long>(run.at("cum_rollouts").get<int64_t>()), ftr, fte);
    if (run.contains("error"))
      out << "  error: " << run.at("error").get<std::string>() << "\n";
  }
  const auto& s = rj.at("summary");
  out << "median rounds-to-converge: "
      << (s.at("median_rounds_to_converge").is_null()
              ? std::string("-")
              : std::to_string(s.at("median_rounds_to_converge").get<double>()))
      << "  median rollouts: " << s.at("median_cum_rollouts").get<double>()
      << "  final train pass@1: " << s.at("final_train_pass1_mean").get<double>()
      << "  final test pass@1: " << s.at("final_test_pass1_mean").get<double>() << "\n";
}

int cmd_run(const CLI::App* sub, const cli_options& o) {
  experiment_spec spec = build_spec(sub, o);
  reconcile_preset(spec);
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
  if (o.dump_config_only) {
    std::cout << dump_config(spec);
    return 0;
  }

  const experiment_report rep = replicate(spec);
  const output_paths paths = write_outputs(rep, spec.out_dir);
  const auto rj = nlohmann::json::parse(report_to_json(rep));
  print_report_table(std::cout, rj);
  std::cout << "artifacts: " << paths.curves_csv << ", " << paths.report_json << ", "
            << paths.manifest_jsonl << ", " << paths.config_dump << ", " << paths.taskset_json
            << "\n";
  if (rep.partial) {
    std::cerr << "error: " << std::count_if(rep.runs.begin(), rep.runs.end(),
                                            [](const run_result& r) { return r.failed(); })
              << " seed(s) failed\n";
    return 1;
  }
  return 0;
}

int cmd_sweep(const CLI::App* sub, const cli_options& o) {
  const experiment_spec base = build_spec(sub, o);
  std::vector<double> targets;
  std::istringstream in(o.targets);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    targets.push_back(parse_real(t, "--targets", "flag"));
  }
  if (targets.empty()) throw config_error("--targets expects a comma list of difficulty values");

  if (o.dump_config_only) {
    for (double t : targets) {
      experiment_spec spec = base;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", t);
      apply_config_key(spec, "task.difficulty_target", buf, "flag");
      reconcile_preset(spec);
      std::cout << dump_config(spec);
    }
    return 0;
  }

  int rc = 0;
  for (double t : targets) {
    experiment_spec spec = base;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", t);
    apply_config_key(spec, "task.difficulty_target", buf, "flag");
    reconcile_preset(spec);
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw config_error(e.what());
    }
    char dirbuf[64];
    std::snprintf(dirbuf, sizeof dirbuf, "d%g", t);
    spec.out_dir = base.out_dir + "/" + dirbuf;

    const experiment_report rep = replicate(spec);
    write_outputs(rep, spec.out_dir);
    std::cout << "target " << t << " -> " << spec.out_dir << "  (median rounds: ";
    if (rep.median_rounds_to_converge)
      std::cout << *rep.median_rounds_to_converge;
    else
      std::cout << "-";
    std::cout << ", final train pass@1 mean: " << rep.final_train_pass1_mean << ")\n";
    if (rep.partial) {
      std::cerr << "error: target " << t << " had failed seeds\n";
      rc = 1;
    }
  }
  return rc;
}

double median_or_inf(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::infinity();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct dir_summary {
  std::string label;
  nlohmann::json report;
  std::vector<double> conv, rollouts, final_train, final_test;
};

dir_summary load_dir(const std::string& dir) {
  dir_summary s;
  s.label = dir;
  const std::string csv_path = dir + "/curves.csv";
  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv.good()) throw std::runtime_error("cannot read " + csv_path);
  std::ostringstream ss;
  ss << csv.rdbuf();
  const std::string schema_error = check_curves_csv(ss.str());
  if (!schema_error.empty())
    throw std::runtime_error(csv_path + ": schema check failed: " + schema_error);

  std::ifstream rep(dir + "/report.json", std::ios::binary);
  if (!rep.good()) throw std::runtime_error("cannot read " + dir + "/report.json");
  s.report = nlohmann::json::parse(rep);

  for (const auto& run : s.report.at("runs")) {
    if (run.contains("error")) continue;
    s.conv.push_back(run.at("converged_round").is_null()
                         ? std::numeric_limits<double>::infinity()
                         : run.at("converged_round").get<double>());
    s.rollouts.push_back(run.at("cum_rollouts").get<double>());
    if (run.contains("final")) {
      s.final_train.push_back(run.at("final").at("train_pass1").get<double>());
      s.final_test.push_back(run.at("final").at("test_pass1").get<double>());
    }
  }
  return s;
}

void print_band(const char* name, const std::vector<double>& a, const std::vector<double>& b) {
  const auto lohi = [](const std::vector<double>& v) {
    return std::pair<double, double>{*std::min_element(v.begin(), v.end()),
                                     *std::max_element(v.begin(), v.end())};
  };
  if (a.empty() || b.empty()) return;
  const auto [alo, ahi] = lohi(a);
  const auto [blo, bhi] = lohi(b);
  const bool overlap = alo <= bhi && blo <= ahi;
  std::printf("  %-22s [%.4f, %.4f] vs [%.4f, %.4f]  %s\n", name, alo, ahi, blo, bhi,
              overlap ? "overlap" : "disjoint");
}

int cmd_report(const std::vector<std::string>& dirs) {
  std::vector<dir_summary> sums;
  for (const std::string& d : dirs) sums.push_back(load_dir(d));
  for (const auto& s : sums) {
    std::cout << "== " << s.label << " ==\n";
    print_report_table(std::cout, s.report);
    std::cout << "csv schema: ok\n\n";
  }
  if (sums.size() == 2) {
    const auto& a = sums[0];
    const auto& b = sums[1];
    std::cout << "comparison (" << a.label << " vs " << b.label << ")\n";
    const double ca = median_or_inf(a.conv), cb = median_or_inf(b.conv);
    std::printf("  %-22s %g vs %g\n", "median rounds", ca, cb);
    std::printf("  %-22s %g vs %g\n", "median rollouts", median_or_inf(a.rollouts),
                median_or_inf(b.rollouts));
    print_band("final train pass@1", a.final_train, b.final_train);
    print_band("final test pass@1", a.final_test, b.final_test);
  }
  return 0;
}

}  // namespace

// ---- entry point ---------------------------------------------------------------

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"desk-scale simulator of verifier-reward fine-tuning on tabular policies"};
  app.require_subcommand(1);

  cli_options run_opts, sweep_opts;
  CLI::App* run_sub = app.add_subcommand("run", "run one experiment (preset, config, overrides)");
  add_common_flags(run_sub, run_opts);

  CLI::App* sweep_sub =
      app.add_subcommand("sweep", "run one report per difficulty target, shared seeds");
  add_common_flags(sweep_sub, sweep_opts);
  sweep_sub->add_option("--targets", sweep_opts.targets,
                        "comma list of difficulty targets (e.g. 0.1,0.3,0.8)");

  std::vector<std::string> report_dirs;
  CLI::App* report_sub =
      app.add_subcommand("report", "summarize one run directory, or compare two");
  report_sub->add_option("dirs", report_dirs, "output director(ies) of previous runs")
      ->expected(1, 2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run_sub->parsed()) return cmd_run(run_sub, run_opts);
    if (sweep_sub->parsed()) return cmd_sweep(sweep_sub, sweep_opts);
    return cmd_report(report_dirs);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rlsim
