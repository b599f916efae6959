#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rlsim/policy.hpp"
#include "rlsim/verifier.hpp"

namespace rlsim {

struct eval_record {
  int64_t round = 0;
  double train_pass1 = 0.0;        // fraction of n_train_samples fresh samples correct
  double train_pass1_exact = 0.0;  // exact oracle (always available for tabular classes)
  double test_pass1 = 0.0;         // one sample per test task, fraction correct
  int32_t n_train_samples = 100;
  int64_t seed = 0;
};

using curve = std::vector<eval_record>;

struct eval_config {
  int32_t n_train_samples = 100;
  double convergence_threshold = 0.99;
  int32_t convergence_patience = 5;
  int32_t eval_every = 1;

  void validate() const;
};

// Fraction of n independent samples (standard decoding) that are correct.
// Unbiased estimator of exact_pass_prob; never mutates params.
double eval_train_pass1(const policy_params& params, const task& train_task, int n,
                        random_stream& rng);

// One sample per test task, fraction correct. Same decoding as training.
double eval_test_pass1(const policy_params& params, const task_set& tasks, random_stream& rng);

// Mean exact pass probability over the test tasks (noise-free counterpart of
// eval_test_pass1, used by reports).
double exact_test_pass_mean(const policy_params& params, const task_set& tasks);

// First round whose train_pass1 is >= threshold for `patience` consecutive
// eval records; nullopt if that never happens.
std::optional<int64_t> detect_convergence(const curve& c, double threshold = 0.99,
                                          int patience = 5);

}  // namespace rlsim
