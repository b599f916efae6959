#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlsim/policy.hpp"
#include "rlsim/rng.hpp"

namespace rlsim {

// Binary outcome reward. zero_one maps {incorrect, correct} -> {0, 1};
// neg_one_zero maps them to {-1, 0}. For every response the neg_one_zero
// score equals the zero_one score minus one.
enum class reward_metric { zero_one, neg_one_zero };

std::string to_string(reward_metric m);
reward_metric reward_metric_from_string(const std::string& s);

struct task {
  int32_t query = 0;
  std::vector<token_seq> answers;  // nonempty, sorted, unique
  reward_metric metric = reward_metric::zero_one;
  double target_base_pass1 = -1.0;  // <0 = not calibrated
  double feature_overlap = 1.0;     // share of answer/arm structure reused from the train task

  void validate(const vocabulary& vocab) const;
};

struct task_set {
  std::vector<task> tasks;
  int32_t train_index = 0;
  std::vector<int32_t> test_indices;

  const task& train() const { return tasks.at(static_cast<size_t>(train_index)); }
  void validate() const;
};

// Membership test against the task's answer set (metric-independent).
bool is_correct(const task& t, const token_seq& response);

// Deterministic outcome reward of `response` under the task's metric.
int score(const task& t, const token_seq& response);

// Shift a policy's logits so the exact pass probability of `answers` for
// `query` hits `target` within `tol`. Bandit-family classes use the closed
// form offset = log[target*(K-m) / (m*(1-target))] on the answer arms (all
// other logits equal); the autoregressive class bisects a shared offset on
// the answer-path edges (at most 100 iterations). Throws std::domain_error
// naming the feasible range when the target cannot be reached.
void calibrate_difficulty(policy_params& params, int32_t query,
                          const std::vector<token_seq>& answers, double target, double tol);

// Default calibration tolerances per class.
double default_calibration_tol(policy_class cls);

// Empirical Pass@1: fraction of n independent samples (default decoding) that
// are correct. Distributed Binomial(n, exact_pass_prob)/n.
double measure_difficulty(const policy_params& params, const task& t, int n, random_stream& rng);

// ---- task-set + base-policy construction -----------------------------------
//
// The environment for one experiment: a single train task, N test tasks, and
// a base policy calibrated so the train task's pass probability equals the
// difficulty target. Test tasks reuse a `feature_overlap` share of the train
// task's answer/arm structure:
//
//   independent_bandit      per-query logit rows are disjoint by construction;
//                           overlap only picks how often a test answer reuses
//                           the train answer's arm index (no parameter effect).
//   shared_feature_linear   each test arm aliases the train task's component
//                           for that arm with probability `overlap` (answer
//                           arms pair with answer arms) and otherwise gets a
//                           private theta component.
//   autoregressive_tabular  a test answer reuses the train answer's suffix
//                           (shared transition rows) with probability
//                           `overlap`; its first token is always private to
//                           the query's initial state.
//
// Every task of the bandit-family classes is calibrated to the target
// exactly; autoregressive test tasks are calibrated through their private
// initial-state edge only and clamp to the reachable range, recording the
// achieved value in target_base_pass1.

struct taskgen_config {
  policy_class cls = policy_class::shared_feature_linear;
  vocabulary vocab{4096, 1};
  int32_t num_test_tasks = 50;
  int32_t answers_per_task = 1;
  double feature_overlap = 0.5;
  double difficulty_target = 0.1;
  reward_metric metric = reward_metric::zero_one;

  void validate() const;
};

struct environment {
  task_set tasks;
  policy_params base_params;
};

// Draw the tasks alone: answers, metric, per-task overlap/target fields.
task_set generate_tasks(const taskgen_config& cfg, random_stream& rng);

// Wire up and calibrate a base policy for an existing task set (generated or
// loaded from a file). Autoregressive test tasks that cannot reach their
// target get clamped, and their target_base_pass1 is rewritten to the
// achieved value.
policy_params build_policy(const taskgen_config& cfg, task_set& tasks, random_stream& rng);

// generate_tasks + build_policy in one step.
environment generate_environment(const taskgen_config& cfg, random_stream& rng);

// ---- task-set files ---------------------------------------------------------
// JSON: {tasks: [{query, answers: [[token,...],...], metric, target_base_pass1,
// feature_overlap}], train_index, test_indices}.

std::string taskset_to_json(const task_set& ts);
task_set taskset_from_json(const std::string& json_text);
void save_taskset(const task_set& ts, const std::string& path);
task_set load_taskset(const std::string& path);

}  // namespace rlsim
