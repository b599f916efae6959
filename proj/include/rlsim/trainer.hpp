#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlsim/grad.hpp"
#include "rlsim/policy.hpp"
#include "rlsim/verifier.hpp"

namespace rlsim {

// How per-rollout training signals are derived from rewards.
enum class advantage_mode { reward_as_signal, grpo_normalized };
// Which rollouts contribute surrogate gradient (advantages always use all G).
enum class signal_source { all_rollouts, first_rollout_only };
// KL estimator: sampled_k3 is the per-token k3 = exp(d) - d - 1 estimator;
// exact enumerates the response space (small spaces only).
enum class kl_estimator { sampled_k3, exact };
// Surrogate aggregation. Only one scheme is defined (token mean within a
// rollout, then mean over contributing rollouts); kept as an enum so configs
// can state it explicitly and reject anything else.
enum class grad_aggregation { mean_over_tokens_then_rollouts };

std::string to_string(advantage_mode m);
std::string to_string(signal_source s);
std::string to_string(kl_estimator k);
advantage_mode advantage_mode_from_string(const std::string& s);
signal_source signal_source_from_string(const std::string& s);
kl_estimator kl_estimator_from_string(const std::string& s);

struct train_config {
  int32_t group_size = 1;  // G rollouts per round
  double clip_epsilon = 0.2;
  double kl_coef = 0.001;
  advantage_mode advantage = advantage_mode::reward_as_signal;
  signal_source signal = signal_source::all_rollouts;
  int32_t inner_epochs = 1;
  kl_estimator kl_est = kl_estimator::sampled_k3;
  grad_aggregation aggregation = grad_aggregation::mean_over_tokens_then_rollouts;
  optimizer_config opt;  // learning rate + update rule
  decoding_config decoding;

  void validate() const;
};

struct rollout_batch {
  int32_t query = 0;
  std::vector<token_seq> responses;               // G rollouts
  std::vector<int> rewards;                       // G outcome rewards
  std::vector<std::vector<double>> logprobs_old;  // per rollout, per token, at sampling time
  std::vector<double> advantages;                 // filled by compute_advantage

  int32_t group_size() const { return static_cast<int32_t>(responses.size()); }
  void validate() const;
};

struct round_log {
  int64_t round = 0;
  double mean_reward = 0.0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double kl = 0.0;
  double entropy = 0.0;
  double clip_active_frac = 0.0;
  double ratio_min = 1.0;
  double ratio_mean = 1.0;
  double ratio_max = 1.0;
};

// rewards -> advantages. reward_as_signal passes rewards through unchanged;
// grpo_normalized returns (r_i - mean) / population-std, all zeros when the
// std is zero. grpo_normalized requires G >= 2.
std::vector<double> compute_advantage(const std::vector<int>& rewards, advantage_mode mode);

struct objective_result {
  double value = 0.0;            // J = surrogate - kl_coef * KL
  double surrogate = 0.0;        // clipped-ratio term, contributing rollouts only
  double kl = 0.0;               // KL estimate over the whole batch
  double clip_active_frac = 0.0; // contributing tokens on the clipped branch
  double ratio_min = 1.0;
  double ratio_mean = 1.0;
  double ratio_max = 1.0;
};

// Clipped-surrogate objective with KL penalty, and its ascent gradient:
//   J = mean_i mean_t min(r A_i, clip(r, 1-eps, 1+eps) A_i) - beta * KL
// with r = exp(logprob_new - logprob_old) per token. The surrogate mean runs
// over contributing rollouts (all of them, or only the first, per
// config.signal); the KL term always covers the whole batch. Gradient flows
// only through r and the KL estimator. Accumulates into `g`.
objective_result objective_and_grad(const policy_params& params, const policy_params& ref,
                                    const rollout_batch& batch, const train_config& cfg,
                                    grad_accum& g);

// KL diagnostic on its own (no gradient). sampled_k3 averages per-token k3
// over each rollout then over the batch; exact enumerates KL(params || ref)
// for the query and ignores the batch contents.
double kl_term(const policy_params& params, const policy_params& ref, const rollout_batch& batch,
               kl_estimator estimator);

// One training round owns the mutable state: current params, the frozen
// reference snapshot, the optimizer, and counters.
struct train_state {
  policy_params params;
  policy_params ref;  // reference snapshot frozen at run start
  task train_task;
  train_config config;
  optimizer opt;
  grad_accum scratch;         // reused across rounds
  int64_t round = 0;          // completed rounds
  int64_t cum_rollouts = 0;   // conservation: rounds executed * G

  train_state(policy_params initial, task tr, const train_config& cfg)
      : params(std::move(initial)),
        ref(params),
        train_task(std::move(tr)),
        config(cfg),
        opt(cfg.opt, params.dim()),
        scratch(params.dim()) {}
};

// Sample G rollouts, score, compute advantages, take one ascent step per
// inner epoch, and return the round's diagnostics (measured at the sampling
// parameters). Throws if any logged quantity is non-finite.
round_log train_round(train_state& state, random_stream& rng);

}  // namespace rlsim
