#include "rlsim/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "rlsim/rng.hpp"

namespace rlsim {

const char* const kCodeVersion = "rlsim 0.1.0";

const char* const kCurvesCsvHeader =
    "run_id,preset,seed,round,train_pass1,train_pass1_exact,test_pass1,mean_reward,objective,"
    "kl,entropy,grad_norm,clip_active_frac,cum_rollouts";

// ---- presets ----------------------------------------------------------------

std::string to_string(preset_id p) {
  switch (p) {
    case preset_id::exp1: return "exp1";
    case preset_id::exp2: return "exp2";
    case preset_id::exp3: return "exp3";
    case preset_id::exp4: return "exp4";
    case preset_id::exp5: return "exp5";
    case preset_id::exp6: return "exp6";
    case preset_id::custom: return "custom";
  }
  throw std::logic_error("bad preset_id");
}

preset_id preset_from_string(const std::string& s) {
  for (preset_id p : {preset_id::exp1, preset_id::exp2, preset_id::exp3, preset_id::exp4,
                      preset_id::exp5, preset_id::exp6, preset_id::custom})
    if (s == to_string(p)) return p;
  throw std::invalid_argument("unknown preset: " + s);
}

experiment_spec spec_from_preset(preset_id p) {
  experiment_spec s;  // field defaults are the exp1 baseline
  s.preset = p;
  s.seeds = {0, 1, 2, 3, 4};
  switch (p) {
    case preset_id::exp1:
    case preset_id::custom:
      break;
    case preset_id::exp2:
      s.trainer.group_size = 4;
      s.trainer.advantage = advantage_mode::grpo_normalized;
      s.trainer.signal = signal_source::first_rollout_only;
      break;
    case preset_id::exp3:
      s.trainer.group_size = 4;
      break;
    case preset_id::exp4:
      s.task.difficulty_target = 0.03;
      break;
    case preset_id::exp5:
      s.task.metric = reward_metric::neg_one_zero;
      break;
    case preset_id::exp6:
      s.task.cls = policy_class::independent_bandit;
      break;
  }
  return s;
}

void experiment_spec::validate() const {
  task.validate();
  trainer.validate();
  eval.validate();
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (grace < 0) throw std::invalid_argument("grace must be >= 0");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  std::set<int64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size()) throw std::invalid_argument("seeds must be distinct");
  if (workers < 0) throw std::invalid_argument("workers must be >= 0");
}

// ---- config dump / hash ------------------------------------------------------

namespace {

// shortest decimal form that parses back to the same double
std::string fmt_double(double v) {
  char buf[64];
  const std::to_chars_result res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join_seeds(const std::vector<int64_t>& seeds) {
  std::string out;
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::map<std::string, std::string> dump_map(const experiment_spec& s) {
  std::map<std::string, std::string> kv;
  kv["preset"] = to_string(s.preset);
  kv["task.class"] = to_string(s.task.cls);
  kv["task.vocab_size"] = std::to_string(s.task.vocab.size);
  kv["task.max_len"] = std::to_string(s.task.vocab.max_len);
  kv["task.num_test_tasks"] = std::to_string(s.task.num_test_tasks);
  kv["task.answers_per_task"] = std::to_string(s.task.answers_per_task);
  kv["task.feature_overlap"] = fmt_double(s.task.feature_overlap);
  kv["task.difficulty_target"] = fmt_double(s.task.difficulty_target);
  kv["task.metric"] = to_string(s.task.metric);
  kv["task.file"] = s.task_file;
  kv["task.seed"] = std::to_string(s.task_seed);
  kv["trainer.group_size"] = std::to_string(s.trainer.group_size);
  kv["trainer.clip_epsilon"] = fmt_double(s.trainer.clip_epsilon);
  kv["trainer.kl_coef"] = fmt_double(s.trainer.kl_coef);
  kv["trainer.advantage"] = to_string(s.trainer.advantage);
  kv["trainer.signal"] = to_string(s.trainer.signal);
  kv["trainer.inner_epochs"] = std::to_string(s.trainer.inner_epochs);
  kv["trainer.kl_estimator"] = to_string(s.trainer.kl_est);
  kv["trainer.aggregation"] = "mean_over_tokens_then_rollouts";
  kv["trainer.optimizer"] = to_string(s.trainer.opt.kind);
  kv["trainer.learning_rate"] = fmt_double(s.trainer.opt.learning_rate);
  kv["trainer.beta2"] = fmt_double(s.trainer.opt.beta2);
  kv["trainer.optimizer_eps"] = fmt_double(s.trainer.opt.eps);
  kv["trainer.temperature"] = fmt_double(s.trainer.decoding.temperature);
  kv["trainer.top_p"] = fmt_double(s.trainer.decoding.top_p);
  kv["eval.n_train_samples"] = std::to_string(s.eval.n_train_samples);
  kv["eval.convergence_threshold"] = fmt_double(s.eval.convergence_threshold);
  kv["eval.convergence_patience"] = std::to_string(s.eval.convergence_patience);
  kv["eval.eval_every"] = std::to_string(s.eval.eval_every);
  kv["run.horizon"] = std::to_string(s.horizon);
  kv["run.grace"] = std::to_string(s.grace);
  kv["run.seeds"] = join_seeds(s.seeds);
  kv["run.master_seed"] = std::to_string(s.master_seed);
  return kv;  // std::map iterates in key order, which keeps the dump sorted
}

// design fields fall under the one-change rule; execution and sourcing
// fields do not
bool is_design_key(const std::string& k) {
  if (k.rfind("trainer.", 0) == 0 || k.rfind("eval.", 0) == 0) return true;
  if (k.rfind("task.", 0) == 0) return k != "task.file" && k != "task.seed";
  return false;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string now_iso8601() {
  const std::time_t tt = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

}  // namespace

std::string dump_config(const experiment_spec& spec) {
  std::string out;
  for (const auto& [k, v] : dump_map(spec)) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

uint64_t spec_hash(const experiment_spec& spec) {
  const std::string text = dump_config(spec);
  uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void assert_preset_consistency(const experiment_spec& spec) {
  if (spec.preset == preset_id::custom) return;
  const auto base = dump_map(spec_from_preset(preset_id::exp1));
  const auto want = dump_map(spec_from_preset(spec.preset));
  const auto got = dump_map(spec);
  for (const auto& [k, v] : got) {
    if (!is_design_key(k)) continue;
    const std::string& w = want.at(k);
    if (v == w) continue;
    if (w != base.at(k))
      throw std::invalid_argument("preset " + to_string(spec.preset) + ": axis field " + k +
                                  " must be " + w + ", got " + v);
    throw std::invalid_argument("preset " + to_string(spec.preset) + ": off-axis field " + k +
                                " = " + v + " departs from the exp1 baseline (" + base.at(k) +
                                ")");
  }
}

// ---- environment -------------------------------------------------------------

environment materialize_environment(const experiment_spec& spec) {
  spec.validate();
  const random_stream root(spec.task_seed);
  environment env;
  if (spec.task_file.empty()) {
    random_stream gen = fork(root, stream_tag::task_gen);
    env.tasks = generate_tasks(spec.task, gen);
  } else {
    env.tasks = load_taskset(spec.task_file);
  }
  // a separate stream keeps the wiring identical whether the tasks were just
  // generated or loaded back from taskset.json
  random_stream init = fork(root, stream_tag::policy_init);
  env.base_params = build_policy(spec.task, env.tasks, init);
  return env;
}

// ---- single run ----------------------------------------------------------------

run_result run_single(const experiment_spec& spec, const environment& env, int64_t seed) {
  run_result out;
  out.seed = seed;
  out.manifest.run_id = to_string(spec.preset) + "-s" + std::to_string(seed);
  out.manifest.spec_hash = spec_hash(spec);
  out.manifest.seed = seed;
  out.manifest.code_version = kCodeVersion;
  out.manifest.start_time = now_iso8601();
  try {
    spec.validate();
    const uint64_t root = mix_seed(spec.master_seed, static_cast<uint64_t>(seed));
    random_stream train_rng(mix_seed(root, static_cast<uint64_t>(stream_tag::train_sampling)));
    random_stream eval_train_rng(mix_seed(root, static_cast<uint64_t>(stream_tag::eval_train)));
    random_stream eval_test_rng(mix_seed(root, static_cast<uint64_t>(stream_tag::eval_test)));

    train_state st(env.base_params, env.tasks.train(), spec.trainer);
    out.round0_exact_test_mean = exact_test_pass_mean(st.params, env.tasks);

    const auto push_eval = [&](int64_t round, const round_log& lg) {
      eval_record rec;
      rec.round = round;
      rec.seed = seed;
      rec.n_train_samples = spec.eval.n_train_samples;
      rec.train_pass1 =
          eval_train_pass1(st.params, st.train_task, spec.eval.n_train_samples, eval_train_rng);
      rec.train_pass1_exact = exact_pass_prob(st.params, st.train_task.query, st.train_task.answers);
      rec.test_pass1 = eval_test_pass1(st.params, env.tasks, eval_test_rng);
      out.records.push_back(rec);
      out.logs.push_back(lg);
    };

    round_log log0;  // round 0: no training yet, only the entropy is meaningful
    log0.entropy = entropy(st.params, st.train_task.query).value;
    push_eval(0, log0);

    int64_t stop_at = spec.horizon;
    for (int64_t round = 1; round <= stop_at; ++round) {
      const round_log lg = train_round(st, train_rng);
      if (round % spec.eval.eval_every != 0) continue;
      push_eval(round, lg);
      if (out.converged_round) continue;
      out.converged_round = detect_convergence(out.records, spec.eval.convergence_threshold,
                                               spec.eval.convergence_patience);
      if (out.converged_round)
        stop_at = std::min<int64_t>(spec.horizon,
                                    std::max<int64_t>(round, *out.converged_round + spec.grace));
    }
    out.rounds_executed = st.round;
    out.cum_rollouts = st.cum_rollouts;
    out.final_exact_test_mean = exact_test_pass_mean(st.params, env.tasks);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.manifest.end_time = now_iso8601();
  return out;
}

// ---- replication ---------------------------------------------------------------

namespace {

void summarize(experiment_report& rep) {
  std::vector<double> conv, rollouts, ftr, fte, ftr_exact, fte_exact;
  for (const auto& r : rep.runs) {
    if (r.failed()) {
      rep.partial = true;
      rep.notes.push_back("seed " + std::to_string(r.seed) + " failed: " + r.error);
      continue;
    }
    conv.push_back(r.converged_round ? static_cast<double>(*r.converged_round)
                                     : std::numeric_limits<double>::infinity());
    rollouts.push_back(static_cast<double>(r.cum_rollouts));
    if (!r.records.empty()) {
      ftr.push_back(r.records.back().train_pass1);
      fte.push_back(r.records.back().test_pass1);
      ftr_exact.push_back(r.records.back().train_pass1_exact);
    }
    fte_exact.push_back(r.final_exact_test_mean);
  }

  if (!conv.empty()) {
    const double m = median_of(conv);
    if (std::isfinite(m)) rep.median_rounds_to_converge = m;
  }
  rep.median_cum_rollouts = median_of(rollouts);

  const auto mean_of = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };
  const auto std_of = [&](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
  };
  rep.final_train_pass1_mean = mean_of(ftr);
  rep.final_train_pass1_std = std_of(ftr);
  rep.final_test_pass1_mean = mean_of(fte);
  rep.final_test_pass1_std = std_of(fte);
  rep.final_train_exact_mean = mean_of(ftr_exact);
  rep.final_test_exact_mean = mean_of(fte_exact);

  if (rep.spec.preset == preset_id::exp6)
    rep.notes.push_back(
        "independent_bandit shares no parameters across queries; training moves only the "
        "train task, so test pass@1 stays at its calibrated base value");
}

}  // namespace

experiment_report replicate(const experiment_spec& spec) {
  spec.validate();
  assert_preset_consistency(spec);
  const environment env = materialize_environment(spec);

  experiment_report rep;
  rep.spec = spec;
  rep.runs.assign(spec.seeds.size(), run_result{});

  int32_t requested = spec.workers;
  if (requested == 0) requested = static_cast<int32_t>(std::thread::hardware_concurrency());
  if (requested < 1) requested = 1;
  const size_t n_workers = std::min<size_t>(static_cast<size_t>(requested), spec.seeds.size());

  std::atomic<size_t> next(0);
  const auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < spec.seeds.size(); i = next.fetch_add(1)) {
      try {
        rep.runs[i] = run_single(spec, env, spec.seeds[i]);
      } catch (const std::exception& e) {  // run_single catches its own; last resort
        rep.runs[i].seed = spec.seeds[i];
        rep.runs[i].error = e.what();
      }
    }
  };
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  summarize(rep);
  return rep;
}

// ---- comparisons ----------------------------------------------------------------

namespace {

double field_value(const eval_record& r, curve_field f) {
  switch (f) {
    case curve_field::train_pass1: return r.train_pass1;
    case curve_field::train_pass1_exact: return r.train_pass1_exact;
    case curve_field::test_pass1: return r.test_pass1;
  }
  throw std::logic_error("bad curve_field");
}

std::map<int64_t, band> bands_by_round(const experiment_report& rep, curve_field f) {
  std::map<int64_t, band> out;
  for (const auto& run : rep.runs) {
    if (run.failed()) continue;
    for (const auto& rec : run.records) {
      const double v = field_value(rec, f);
      auto [it, fresh] = out.try_emplace(rec.round, band{v, v});
      if (!fresh) {
        it->second.lo = std::min(it->second.lo, v);
        it->second.hi = std::max(it->second.hi, v);
      }
    }
  }
  return out;
}

// min-max band over each run's final record, plus the median final value
band final_band(const experiment_report& rep, curve_field f, double& median_out) {
  std::vector<double> vals;
  for (const auto& run : rep.runs) {
    if (run.failed() || run.records.empty()) continue;
    vals.push_back(field_value(run.records.back(), f));
  }
  if (vals.empty()) throw std::invalid_argument("compare: report has no completed runs");
  median_out = median_of(vals);
  return {*std::min_element(vals.begin(), vals.end()),
          *std::max_element(vals.begin(), vals.end())};
}

bool bands_intersect(const band& a, const band& b) { return a.lo <= b.hi && b.lo <= a.hi; }

}  // namespace

compare_summary compare(const experiment_report& a, const experiment_report& b,
                        curve_field field) {
  if (a.spec.eval.eval_every != b.spec.eval.eval_every)
    throw std::invalid_argument("compare: eval grids differ (eval_every " +
                                std::to_string(a.spec.eval.eval_every) + " vs " +
                                std::to_string(b.spec.eval.eval_every) + ")");
  const auto ba = bands_by_round(a, field);
  const auto bb = bands_by_round(b, field);
  int64_t common = 0, overlapping = 0;
  for (const auto& [round, band_a] : ba) {
    const auto it = bb.find(round);
    if (it == bb.end()) continue;
    ++common;
    if (bands_intersect(band_a, it->second)) ++overlapping;
  }
  if (common == 0) throw std::invalid_argument("compare: no common eval rounds");

  compare_summary cs;
  cs.per_round_band_overlap = static_cast<double>(overlapping) / static_cast<double>(common);
  double med_a = 0.0, med_b = 0.0;
  cs.final_a = final_band(a, field, med_a);
  cs.final_b = final_band(b, field, med_b);
  cs.final_bands_overlap = bands_intersect(cs.final_a, cs.final_b);
  cs.final_median_delta = med_b - med_a;
  return cs;
}

// ---- artifacts --------------------------------------------------------------------

std::string curves_csv(const experiment_report& report) {
  std::string out = kCurvesCsvHeader;
  out += '\n';
  char buf[512];
  for (const auto& run : report.runs) {
    for (size_t i = 0; i < run.records.size(); ++i) {
      const eval_record& rec = run.records[i];
      const round_log& lg = run.logs.at(i);
      const long long rollouts =
          static_cast<long long>(rec.round) * report.spec.trainer.group_size;
      std::snprintf(buf, sizeof buf,
                    "%s,%s,%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld\n",
                    run.manifest.run_id.c_str(), to_string(report.spec.preset).c_str(),
                    static_cast<long long>(run.seed), static_cast<long long>(rec.round),
                    rec.train_pass1, rec.train_pass1_exact, rec.test_pass1, lg.mean_reward,
                    lg.objective, lg.kl, lg.entropy, lg.grad_norm, lg.clip_active_frac, rollouts);
      out += buf;
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

bool parse_i64(const std::string& s, long long& v) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  v = std::strtoll(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

bool parse_finite(const std::string& s, double& v) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(v);
}

}  // namespace

std::string check_curves_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) return "missing header row";
  if (line != kCurvesCsvHeader) return "header mismatch: expected \"" +
                                        std::string(kCurvesCsvHeader) + "\", got \"" + line + "\"";
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.empty()) return where + "empty row";
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 14)
      return where + "expected 14 columns, got " + std::to_string(f.size());
    if (f[0].empty()) return where + "empty run_id";
    try {
      preset_from_string(f[1]);
    } catch (const std::invalid_argument&) {
      return where + "unknown preset \"" + f[1] + "\"";
    }
    long long iv = 0;
    for (size_t col : {size_t{2}, size_t{3}, size_t{13}})
      if (!parse_i64(f[col], iv)) return where + "column " + std::to_string(col + 1) +
                                         " is not an integer: \"" + f[col] + "\"";
    double dv = 0.0;
    for (size_t col = 4; col <= 12; ++col)
      if (!parse_finite(f[col], dv)) return where + "column " + std::to_string(col + 1) +
                                            " is not a finite number: \"" + f[col] + "\"";
  }
  return "";
}

std::string report_to_json(const experiment_report& report) {
  nlohmann::ordered_json j;
  j["preset"] = to_string(report.spec.preset);
  j["spec_hash"] = hash_hex(spec_hash(report.spec));
  j["code_version"] = kCodeVersion;
  j["partial"] = report.partial;
  j["notes"] = report.notes;

  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : dump_map(report.spec)) cfg[k] = v;
  j["config"] = cfg;

  nlohmann::ordered_json summary;
  if (report.median_rounds_to_converge)
    summary["median_rounds_to_converge"] = *report.median_rounds_to_converge;
  else
    summary["median_rounds_to_converge"] = nullptr;
  summary["median_cum_rollouts"] = report.median_cum_rollouts;
  summary["final_train_pass1_mean"] = report.final_train_pass1_mean;
  summary["final_train_pass1_std"] = report.final_train_pass1_std;
  summary["final_test_pass1_mean"] = report.final_test_pass1_mean;
  summary["final_test_pass1_std"] = report.final_test_pass1_std;
  summary["final_train_exact_mean"] = report.final_train_exact_mean;
  summary["final_test_exact_mean"] = report.final_test_exact_mean;
  j["summary"] = summary;

  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& r : report.runs) {
    nlohmann::ordered_json rj;
    rj["run_id"] = r.manifest.run_id;
    rj["seed"] = r.seed;
    if (r.converged_round)
      rj["converged_round"] = *r.converged_round;
    else
      rj["converged_round"] = nullptr;
    rj["rounds_executed"] = r.rounds_executed;
    rj["cum_rollouts"] = r.cum_rollouts;
    rj["round0_exact_test_mean"] = r.round0_exact_test_mean;
    rj["final_exact_test_mean"] = r.final_exact_test_mean;
    rj["n_records"] = r.records.size();
    if (!r.records.empty()) {
      const eval_record& last = r.records.back();
      rj["final"] = {{"round", last.round},
                     {"train_pass1", last.train_pass1},
                     {"train_pass1_exact", last.train_pass1_exact},
                     {"test_pass1", last.test_pass1}};
    }
    if (!r.error.empty()) rj["error"] = r.error;
    runs.push_back(rj);
  }
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

output_paths write_outputs(const experiment_report& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  output_paths paths;
  paths.curves_csv = (fs::path(out_dir) / "curves.csv").string();
  paths.report_json = (fs::path(out_dir) / "report.json").string();
  paths.manifest_jsonl = (fs::path(out_dir) / "manifest.jsonl").string();
  paths.config_dump = (fs::path(out_dir) / "config.txt").string();
  paths.taskset_json = (fs::path(out_dir) / "taskset.json").string();

  write_file(paths.curves_csv, curves_csv(report));
  write_file(paths.report_json, report_to_json(report));
  write_file(paths.config_dump, dump_config(report.spec));

  const environment env = materialize_environment(report.spec);
  save_taskset(env.tasks, paths.taskset_json);

  const std::vector<std::string> artifacts = {paths.curves_csv, paths.report_json,
                                              paths.manifest_jsonl, paths.config_dump,
                                              paths.taskset_json};
  std::string jsonl;
  for (const auto& run : report.runs) {
    nlohmann::ordered_json m;
    m["run_id"] = run.manifest.run_id;
    m["spec_hash"] = hash_hex(run.manifest.spec_hash);
    m["seed"] = run.manifest.seed;
    m["start_time"] = run.manifest.start_time;
    m["end_time"] = run.manifest.end_time;
    m["code_version"] = run.manifest.code_version;
    m["artifact_paths"] = artifacts;
    if (!run.error.empty()) m["error"] = run.error;
    jsonl += m.dump();
    jsonl += '\n';
  }
  write_file(paths.manifest_jsonl, jsonl);
  return paths;
}

}  // namespace rlsim
