#include "rlsim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlsim {

// ---- enum strings ----------------------------------------------------------

std::string to_string(advantage_mode m) {
  return m == advantage_mode::reward_as_signal ? "reward" : "grpo";
}

std::string to_string(signal_source s) {
  return s == signal_source::all_rollouts ? "all" : "first";
}

std::string to_string(kl_estimator k) { return k == kl_estimator::sampled_k3 ? "k3" : "exact"; }

advantage_mode advantage_mode_from_string(const std::string& s) {
  if (s == "reward") return advantage_mode::reward_as_signal;
  if (s == "grpo") return advantage_mode::grpo_normalized;
  throw std::invalid_argument("unknown advantage mode: " + s);
}

signal_source signal_source_from_string(const std::string& s) {
  if (s == "all") return signal_source::all_rollouts;
  if (s == "first") return signal_source::first_rollout_only;
  throw std::invalid_argument("unknown signal source: " + s);
}

kl_estimator kl_estimator_from_string(const std::string& s) {
  if (s == "k3") return kl_estimator::sampled_k3;
  if (s == "exact") return kl_estimator::exact;
  throw std::invalid_argument("unknown kl estimator: " + s);
}

// ---- config / batch validation ---------------------------------------------

void train_config::validate() const {
  if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
    throw std::invalid_argument("clip_epsilon must be in (0, 1)");
  if (kl_coef < 0.0) throw std::invalid_argument("kl_coef must be >= 0");
  if (inner_epochs < 1) throw std::invalid_argument("inner_epochs must be >= 1");
  if (advantage == advantage_mode::grpo_normalized && group_size < 2)
    throw std::invalid_argument("grpo normalization needs group_size >= 2");
  if (!(opt.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(opt.beta2 > 0.0 && opt.beta2 < 1.0))
    throw std::invalid_argument("beta2 must be in (0, 1)");
  if (!(opt.eps > 0.0)) throw std::invalid_argument("optimizer eps must be > 0");
  decoding.validate();
}

void rollout_batch::validate() const {
  const size_t n = responses.size();
  if (n == 0) throw std::invalid_argument("rollout batch is empty");
  if (rewards.size() != n || logprobs_old.size() != n)
    throw std::invalid_argument("rollout batch arrays disagree on group size");
  if (!advantages.empty() && advantages.size() != n)
    throw std::invalid_argument("rollout batch advantages disagree on group size");
  for (size_t i = 0; i < n; ++i)
    if (logprobs_old[i].size() != responses[i].size())
      throw std::invalid_argument("rollout " + std::to_string(i) +
                                  ": per-token log-prob count does not match its length");
}

// ---- advantages -------------------------------------------------------------

std::vector<double> compute_advantage(const std::vector<int>& rewards, advantage_mode mode) {
  if (rewards.empty()) throw std::invalid_argument("compute_advantage: empty rewards");
  std::vector<double> adv(rewards.begin(), rewards.end());
  if (mode == advantage_mode::reward_as_signal) return adv;
  if (adv.size() < 2)
    throw std::invalid_argument("grpo normalization needs at least 2 rollouts");
  double mean = 0.0;
  for (double r : adv) mean += r;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double r : adv) var += (r - mean) * (r - mean);
  var /= static_cast<double>(adv.size());  // population variance
  const double sd = std::sqrt(var);
  if (sd == 0.0) {
    std::fill(adv.begin(), adv.end(), 0.0);
    return adv;
  }
  for (double& r : adv) r = (r - mean) / sd;
  return adv;
}

// ---- objective --------------------------------------------------------------

namespace {

// mean over tokens within each rollout, then over the batch, of
// k3 = exp(d) - d - 1 with d = logprob_ref - logprob_new (nonnegative pointwise)
double sampled_k3_value(const policy_params& params, const policy_params& ref,
                        const rollout_batch& batch) {
  const size_t n = batch.responses.size();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const std::vector<double> lps = per_token_logprobs(params, batch.query, batch.responses[i]);
    const std::vector<double> lps_ref = per_token_logprobs(ref, batch.query, batch.responses[i]);
    double sum = 0.0;
    for (size_t t = 0; t < lps.size(); ++t) {
      const double d = lps_ref[t] - lps[t];
      sum += std::exp(d) - d - 1.0;
    }
    total += sum / static_cast<double>(lps.size());
  }
  return total / static_cast<double>(n);
}

// KL(params || ref) for one query by enumerating the response space
double exact_kl_value(const policy_params& params, const policy_params& ref, int32_t query) {
  double kl = 0.0;
  for (const token_seq& o : enumerate_responses(params.vocab)) {
    const double lp = logprob(params, query, o);
    const double lq = logprob(ref, query, o);
    kl += std::exp(lp) * (lp - lq);
  }
  return kl;
}

}  // namespace

objective_result objective_and_grad(const policy_params& params, const policy_params& ref,
                                    const rollout_batch& batch, const train_config& cfg,
                                    grad_accum& g) {
  batch.validate();
  const size_t n = batch.responses.size();
  if (batch.advantages.size() != n)
    throw std::invalid_argument("objective_and_grad: batch has no advantages");
  const size_t n_contrib = cfg.signal == signal_source::first_rollout_only ? 1 : n;
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;

  objective_result out;
  double ratio_sum = 0.0;
  int64_t n_tokens = 0;
  int64_t n_clipped = 0;
  bool first_ratio = true;

  std::vector<double> coeffs;
  for (size_t i = 0; i < n; ++i) {
    const token_seq& resp = batch.responses[i];
    const std::vector<double> lps = per_token_logprobs(params, batch.query, resp);
    const size_t len = lps.size();
    coeffs.assign(len, 0.0);

    if (i < n_contrib) {
      const double a = batch.advantages[i];
      const double scale = 1.0 / (static_cast<double>(len) * static_cast<double>(n_contrib));
      for (size_t t = 0; t < len; ++t) {
        const double r = std::exp(lps[t] - batch.logprobs_old[i][t]);
        const double clipped = std::clamp(r, lo, hi);
        out.surrogate += std::min(r * a, clipped * a) * scale;
        // min() selects the constant clipped branch exactly when the ratio has
        // left the trust region in the direction the advantage pushes
        const bool clipped_out = (a > 0.0 && r > hi) || (a < 0.0 && r < lo);
        if (!clipped_out && a != 0.0) coeffs[t] += a * r * scale;
        if (clipped_out) ++n_clipped;
        if (first_ratio) {
          out.ratio_min = out.ratio_max = r;
          first_ratio = false;
        } else {
          out.ratio_min = std::min(out.ratio_min, r);
          out.ratio_max = std::max(out.ratio_max, r);
        }
        ratio_sum += r;
        ++n_tokens;
      }
    }

    if (cfg.kl_est == kl_estimator::sampled_k3) {
      const std::vector<double> lps_ref = per_token_logprobs(ref, batch.query, resp);
      const double scale = 1.0 / (static_cast<double>(len) * static_cast<double>(n));
      double sum = 0.0;
      for (size_t t = 0; t < len; ++t) {
        const double ed = std::exp(lps_ref[t] - lps[t]);
        sum += ed - (lps_ref[t] - lps[t]) - 1.0;
        if (cfg.kl_coef != 0.0) coeffs[t] += -cfg.kl_coef * (1.0 - ed) * scale;
      }
      out.kl += sum * scale;
    }

    logprob_grad_weighted(params, batch.query, resp, coeffs, g);
  }

  if (cfg.kl_est == kl_estimator::exact) {
    double kl = 0.0;
    for (const token_seq& o : enumerate_responses(params.vocab)) {
      const double lp = logprob(params, batch.query, o);
      const double lq = logprob(ref, batch.query, o);
      const double term = std::exp(lp) * (lp - lq);
      kl += term;
      // d KL / d values = E_p[(logprob - logprob_ref) * grad logprob]
      if (cfg.kl_coef != 0.0) logprob_grad(params, batch.query, o, -cfg.kl_coef * term, g);
    }
    out.kl = kl;
  }

  if (n_tokens > 0) {
    out.ratio_mean = ratio_sum / static_cast<double>(n_tokens);
    out.clip_active_frac = static_cast<double>(n_clipped) / static_cast<double>(n_tokens);
  }
  out.value = out.surrogate - cfg.kl_coef * out.kl;
  return out;
}

double kl_term(const policy_params& params, const policy_params& ref, const rollout_batch& batch,
               kl_estimator estimator) {
  batch.validate();
  if (estimator == kl_estimator::sampled_k3) return sampled_k3_value(params, ref, batch);
  return exact_kl_value(params, ref, batch.query);
}

// ---- one round --------------------------------------------------------------

round_log train_round(train_state& state, random_stream& rng) {
  const train_config& cfg = state.config;

  rollout_batch batch;
  batch.query = state.train_task.query;
  for (int32_t i = 0; i < cfg.group_size; ++i) {
    sampled_response s = sample_response(state.params, batch.query, cfg.decoding, rng);
    batch.rewards.push_back(score(state.train_task, s.tokens));
    batch.responses.push_back(std::move(s.tokens));
    batch.logprobs_old.push_back(std::move(s.logprobs));
  }
  batch.advantages = compute_advantage(batch.rewards, cfg.advantage);

  round_log log;
  log.round = state.round + 1;
  double reward_sum = 0.0;
  for (int r : batch.rewards) reward_sum += r;
  log.mean_reward = reward_sum / static_cast<double>(cfg.group_size);
  log.entropy = entropy(state.params, batch.query).value;

  for (int32_t epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
    state.scratch.reset();
    const objective_result res =
        objective_and_grad(state.params, state.ref, batch, cfg, state.scratch);
    if (epoch == 0) {  // diagnostics at the sampling parameters
      log.objective = res.value;
      log.kl = res.kl;
      log.clip_active_frac = res.clip_active_frac;
      log.ratio_min = res.ratio_min;
      log.ratio_mean = res.ratio_mean;
      log.ratio_max = res.ratio_max;
      log.grad_norm = state.scratch.l2_norm();
    }
    state.opt.step(state.params.values, state.scratch);
  }

  if (!std::isfinite(log.objective) || !std::isfinite(log.grad_norm) ||
      !std::isfinite(log.kl) || !std::isfinite(log.entropy))
    throw std::runtime_error("non-finite training diagnostics at round " +
                             std::to_string(log.round));

  state.round += 1;
  state.cum_rollouts += cfg.group_size;
  return log;
}

}  // namespace rlsim
