#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlsim/evaluation.hpp"
#include "rlsim/trainer.hpp"
#include "rlsim/verifier.hpp"

namespace rlsim {

// Exp1 is the minimalist baseline; every other preset changes exactly one
// design axis relative to it (machine-checked in assert_preset_consistency):
//   exp2  signal design: G = 4, GRPO-normalized advantage, first rollout only
//   exp3  signal design: G = 4 (reward-as-signal, all rollouts kept)
//   exp4  difficulty target: 0.03 (< 0.05, the extreme regime)
//   exp5  reward metric: {-1, 0}
//   exp6  policy class: independent_bandit (no cross-query sharing)
enum class preset_id { exp1, exp2, exp3, exp4, exp5, exp6, custom };

std::string to_string(preset_id p);
preset_id preset_from_string(const std::string& s);

struct experiment_spec {
  preset_id preset = preset_id::exp1;
  taskgen_config task;
  std::string task_file;      // optional: load a task-set JSON instead of generating
  uint64_t task_seed = 1234;  // task-generation stream, shared across presets/seeds
  train_config trainer;
  eval_config eval;
  int64_t horizon = 2000;
  int64_t grace = 200;         // rounds to keep running after convergence
  std::vector<int64_t> seeds;  // default {0..4}
  uint64_t master_seed = 17;   // per-seed streams derive from (master_seed, seed)
  std::string out_dir;         // resolved by the CLI; not part of the spec hash
  int32_t workers = 1;         // 0 = hardware concurrency; not part of the spec hash

  void validate() const;
};

// The named preset's full spec (defaults everywhere else).
experiment_spec spec_from_preset(preset_id p);

// Enforce the one-change rule on the design fields (task.*, trainer.*,
// eval.*): a non-custom spec must equal the exp1 baseline everywhere except
// its own axis, whose values must match the table above. Execution fields
// (seeds, horizon, grace, master seed, task sourcing) are free so preset runs
// can widen replication without forfeiting the preset label. Throws
// std::invalid_argument naming the offending field.
void assert_preset_consistency(const experiment_spec& spec);

// Canonical flat key=value dump, sorted by key, one per line. Excludes
// run.out and run.workers (execution details, not experiment identity).
std::string dump_config(const experiment_spec& spec);

// FNV-1a 64-bit hash of dump_config: stable under field reordering.
uint64_t spec_hash(const experiment_spec& spec);

// Build (or load) the task set + calibrated base policy for a spec.
environment materialize_environment(const experiment_spec& spec);

struct run_manifest {
  std::string run_id;  // "<preset>-s<seed>"
  uint64_t spec_hash = 0;
  int64_t seed = 0;
  std::string start_time;  // ISO 8601 UTC
  std::string end_time;
  std::vector<std::string> artifact_paths;
  std::string code_version;
};

struct run_result {
  int64_t seed = 0;
  curve records;                  // eval grid, starting at round 0
  std::vector<round_log> logs;    // per eval record; round 0 carries only entropy
  std::optional<int64_t> converged_round;
  int64_t rounds_executed = 0;
  int64_t cum_rollouts = 0;       // = rounds_executed * G, exact
  double round0_exact_test_mean = 0.0;
  double final_exact_test_mean = 0.0;
  run_manifest manifest;
  std::string error;  // nonempty = failed seed (report marked partial)

  bool failed() const { return !error.empty(); }
};

// One seed, end to end: snapshot the reference at round 0, then loop
// train_round + evaluations until the horizon, or until `grace` rounds after
// detected convergence. Deterministic given (spec, environment, seed).
run_result run_single(const experiment_spec& spec, const environment& env, int64_t seed);

struct experiment_report {
  experiment_spec spec;
  std::vector<run_result> runs;  // one per seed, seed order
  bool partial = false;          // any failed seed
  std::vector<std::string> notes;

  // summary over non-failed seeds
  std::optional<double> median_rounds_to_converge;  // nullopt if fewer than half converge
  double median_cum_rollouts = 0.0;
  double final_train_pass1_mean = 0.0, final_train_pass1_std = 0.0;
  double final_test_pass1_mean = 0.0, final_test_pass1_std = 0.0;
  double final_train_exact_mean = 0.0;
  double final_test_exact_mean = 0.0;
};

// Run every seed (fanning out across spec.workers threads), then summarize.
// Failed seeds mark the report partial; they are never dropped silently.
experiment_report replicate(const experiment_spec& spec);

// ---- comparisons ------------------------------------------------------------

enum class curve_field { train_pass1, train_pass1_exact, test_pass1 };

struct band { double lo = 0.0, hi = 0.0; };

struct compare_summary {
  double per_round_band_overlap = 0.0;  // fraction of common-grid rounds whose bands intersect
  band final_a, final_b;                // min-max over seeds of each report's final value
  bool final_bands_overlap = false;
  double final_median_delta = 0.0;      // median_b - median_a
};

// Min-max band comparison of two reports on their common eval grid. Requires
// the same eval_every; throws std::invalid_argument on grid mismatch.
compare_summary compare(const experiment_report& a, const experiment_report& b, curve_field field);

// ---- artifacts ---------------------------------------------------------------

// Column order of curves.csv; header row is mandatory.
extern const char* const kCurvesCsvHeader;

// CSV assembly (17-significant-digit floats, rows in seed then round order).
std::string curves_csv(const experiment_report& report);

// Validate header + row shape/parsability of a curves.csv text.
// Returns an error description, or empty string if the schema holds.
std::string check_curves_csv(const std::string& csv_text);

struct output_paths {
  std::string curves_csv;
  std::string report_json;
  std::string manifest_jsonl;
  std::string config_dump;
  std::string taskset_json;
};

// Write curves.csv, report.json, manifest.jsonl, config.txt, taskset.json
// under out_dir (created if missing). Single writer per file.
output_paths write_outputs(const experiment_report& report, const std::string& out_dir);

std::string report_to_json(const experiment_report& report);

// Version string recorded in manifests.
extern const char* const kCodeVersion;

}  // namespace rlsim
