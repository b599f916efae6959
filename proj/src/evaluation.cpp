#include "rlsim/evaluation.hpp"

#include <stdexcept>

namespace rlsim {

void eval_config::validate() const {
  if (n_train_samples < 1) throw std::invalid_argument("n_train_samples must be >= 1");
  if (!(convergence_threshold > 0.0 && convergence_threshold <= 1.0))
    throw std::invalid_argument("convergence_threshold must be in (0, 1]");
  if (convergence_patience < 1) throw std::invalid_argument("convergence_patience must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
}

double eval_train_pass1(const policy_params& params, const task& train_task, int n,
                        random_stream& rng) {
  if (n < 1) throw std::invalid_argument("eval_train_pass1 needs n >= 1");
  const decoding_config decoding;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const sampled_response s = sample_response(params, train_task.query, decoding, rng);
    if (is_correct(train_task, s.tokens)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double eval_test_pass1(const policy_params& params, const task_set& tasks, random_stream& rng) {
  if (tasks.test_indices.empty()) throw std::invalid_argument("task set has no test tasks");
  const decoding_config decoding;
  int hits = 0;
  for (int32_t idx : tasks.test_indices) {
    const task& t = tasks.tasks[static_cast<size_t>(idx)];
    const sampled_response s = sample_response(params, t.query, decoding, rng);
    if (is_correct(t, s.tokens)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(tasks.test_indices.size());
}

double exact_test_pass_mean(const policy_params& params, const task_set& tasks) {
  if (tasks.test_indices.empty()) throw std::invalid_argument("task set has no test tasks");
  double acc = 0.0;
  for (int32_t idx : tasks.test_indices) {
    const task& t = tasks.tasks[static_cast<size_t>(idx)];
    acc += exact_pass_prob(params, t.query, t.answers);
  }
  return acc / static_cast<double>(tasks.test_indices.size());
}

std::optional<int64_t> detect_convergence(const curve& c, double threshold, int patience) {
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  int streak = 0;
  for (size_t i = 0; i < c.size(); ++i) {
    if (c[i].train_pass1 >= threshold) {
      if (++streak == patience) return c[i + 1 - static_cast<size_t>(patience)].round;
    } else {
      streak = 0;
    }
  }
  return std::nullopt;
}

}  // namespace rlsim
