#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlsim/grad.hpp"
#include "rlsim/rng.hpp"

namespace rlsim {

// A response is a sequence of token indices. Generation always emits exactly
// vocab.max_len tokens (the response space is the size^max_len full-length
// sequences); logprob() additionally accepts shorter prefixes so partial
// responses can be scored.
using token_seq = std::vector<int32_t>;

struct vocabulary {
  int32_t size = 2;     // token count per position
  int32_t max_len = 1;  // response length

  void validate() const;
  // number of full-length responses, or nullopt on overflow past the cap
  std::optional<uint64_t> space_size(uint64_t cap) const;
};

struct decoding_config {
  double temperature = 1.0;
  double top_p = 1.0;

  void validate() const;
};

enum class policy_class { independent_bandit, shared_feature_linear, autoregressive_tabular };

std::string to_string(policy_class c);
policy_class policy_class_from_string(const std::string& s);

// Tabular softmax policy over token sequences. One flat parameter vector
// `values` backs all three classes:
//
//   independent_bandit     one logit row per query: logit(q, a) = values[q*K + a].
//                          Queries share nothing; max_len must be 1.
//   shared_feature_linear  a shared weight vector theta plus per-query one-hot
//                          feature maps: logit(q, a) = values[feature[q][a]].
//                          Queries interact through shared components;
//                          max_len must be 1.
//   autoregressive_tabular order-1 transition table over (state, token):
//                          state is the query for the first token and the
//                          previously emitted token afterwards.
//                          logit(state, a) = values[state_row*V + a] with
//                          rows [0, Q) the per-query initial states and rows
//                          [Q, Q+V) the shared last-token states.
//
// All operations are pure functions of (params, inputs) and safe to call
// concurrently; only the trainer mutates `values`, one run at a time.
struct policy_params {
  policy_class cls = policy_class::independent_bandit;
  vocabulary vocab;
  int32_t num_queries = 1;
  std::vector<double> values;
  std::vector<std::vector<int32_t>> feature;  // shared_feature_linear only

  size_t dim() const { return values.size(); }
  // expected size of `values` for the structural fields above
  size_t expected_dim() const;
  void validate() const;
};

// Zero-initialized (uniform-softmax) parameters of the right shape. For
// shared_feature_linear the feature maps start as identity rows over a
// theta of size vocab.size; task construction re-wires them.
policy_params make_uniform_policy(policy_class cls, const vocabulary& vocab, int32_t num_queries);

struct sampled_response {
  token_seq tokens;
  std::vector<double> logprobs;  // per-token log-probs under the model (untempered)
};

struct entropy_estimate {
  double value = 0.0;      // nats
  double std_error = 0.0;  // 0 on the exact path (all tabular classes)
};

// Draw one response for `query`. Temperature and nucleus truncation shape the
// sampling distribution only; the returned per-token log-probs are always the
// model's own (they match logprob() token for token). Throws std::domain_error
// naming the offending context if any logit is non-finite.
sampled_response sample_response(const policy_params& params, int32_t query,
                                 const decoding_config& decoding, random_stream& rng);

// Sum of per-token conditional log-probs of `response` given `query`.
double logprob(const policy_params& params, int32_t query, const token_seq& response);

// The per-token conditional log-probs behind logprob() (logprob is their sum).
std::vector<double> per_token_logprobs(const policy_params& params, int32_t query,
                                       const token_seq& response);

// Accumulate coeff * d logprob / d values into `g`. Within each visited
// context the components are (indicator[a == token] - p_a) and sum to zero;
// unvisited contexts contribute nothing.
void logprob_grad(const policy_params& params, int32_t query, const token_seq& response,
                  double coeff, grad_accum& g);

// Same, with one coefficient per token: token t adds
// token_coeffs[t] * d logprob(token_t | context_t) / d values. This is the
// trainer's workhorse (surrogate and KL terms weight tokens differently).
void logprob_grad_weighted(const policy_params& params, int32_t query, const token_seq& response,
                           const std::vector<double>& token_coeffs, grad_accum& g);

// Exact sequence entropy of the response distribution for `query`, in nats.
// Computed by dynamic programming over state marginals, so it is exact for
// every tabular class regardless of response-space size.
entropy_estimate entropy(const policy_params& params, int32_t query);

// Sum over `answers` of exp(logprob): the exact Pass@1 of a single draw.
double exact_pass_prob(const policy_params& params, int32_t query,
                       const std::vector<token_seq>& answers);

// All full-length responses of the vocabulary, in lexicographic order.
// Throws std::length_error with a size report when the space exceeds `cap`.
std::vector<token_seq> enumerate_responses(const vocabulary& vocab, uint64_t cap = 1000000);

// ---- checkpoints ----------------------------------------------------------
// Versioned JSON: {format_version, class, vocabulary {size, max_len},
// num_queries, params {...}}. Floats round-trip bit-exactly.

std::string checkpoint_to_json(const policy_params& params);
policy_params checkpoint_from_json(const std::string& json_text);
void save_checkpoint(const policy_params& params, const std::string& path);
policy_params load_checkpoint(const std::string& path);

}  // namespace rlsim
