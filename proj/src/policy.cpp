#include "rlsim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rlsim {

namespace {

using json = nlohmann::ordered_json;

constexpr int32_t kCheckpointVersion = 1;

// One conditioning context = one softmax over vocab.size arms. `base` plus
// arm index addresses values[] for the affine classes; shared features go
// through the query's component map instead.
struct context_ref {
  const policy_params* p = nullptr;
  size_t base = 0;
  const int32_t* map = nullptr;

  size_t param_index(int32_t arm) const {
    return map ? static_cast<size_t>(map[arm]) : base + static_cast<size_t>(arm);
  }
  double logit(int32_t arm) const { return p->values[param_index(arm)]; }
};

context_ref next_token_context(const policy_params& p, int32_t query, const token_seq& prefix,
                               size_t t) {
  context_ref ctx;
  ctx.p = &p;
  const size_t V = static_cast<size_t>(p.vocab.size);
  switch (p.cls) {
    case policy_class::independent_bandit:
      ctx.base = static_cast<size_t>(query) * V;
      break;
    case policy_class::shared_feature_linear:
      ctx.map = p.feature[static_cast<size_t>(query)].data();
      break;
    case policy_class::autoregressive_tabular: {
      const size_t row = (t == 0) ? static_cast<size_t>(query)
                                  : static_cast<size_t>(p.num_queries) +
                                        static_cast<size_t>(prefix[t - 1]);
      ctx.base = row * V;
      break;
    }
  }
  return ctx;
}

std::string describe_context(const policy_params& p, int32_t query, const token_seq& prefix,
                             size_t t) {
  std::ostringstream os;
  os << to_string(p.cls) << " query " << query;
  if (p.cls == policy_class::autoregressive_tabular && t > 0)
    os << " after token " << prefix[t - 1];
  return os.str();
}

void check_finite_context(const policy_params& p, const context_ref& ctx, int32_t query,
                          const token_seq& prefix, size_t t) {
  for (int32_t a = 0; a < p.vocab.size; ++a) {
    if (!std::isfinite(ctx.logit(a)))
      throw std::domain_error("non-finite logit (arm " + std::to_string(a) + ") in context: " +
                              describe_context(p, query, prefix, t));
  }
}

double context_log_norm(const context_ref& ctx, int32_t width) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int32_t a = 0; a < width; ++a) mx = std::max(mx, ctx.logit(a));
  double s = 0.0;
  for (int32_t a = 0; a < width; ++a) s += std::exp(ctx.logit(a) - mx);
  return mx + std::log(s);
}

void check_token(const policy_params& p, int32_t tok) {
  if (tok < 0 || tok >= p.vocab.size)
    throw std::invalid_argument("token " + std::to_string(tok) + " outside vocabulary of size " +
                                std::to_string(p.vocab.size));
}

void check_query(const policy_params& p, int32_t query) {
  if (query < 0 || query >= p.num_queries)
    throw std::invalid_argument("query " + std::to_string(query) + " outside [0, " +
                                std::to_string(p.num_queries) + ")");
}

void check_response(const policy_params& p, const token_seq& response) {
  if (response.empty() || static_cast<int32_t>(response.size()) > p.vocab.max_len)
    throw std::invalid_argument("response length " + std::to_string(response.size()) +
                                " outside [1, " + std::to_string(p.vocab.max_len) + "]");
  for (int32_t tok : response) check_token(p, tok);
}

std::string class_tag(policy_class c) { return to_string(c); }

}  // namespace

// ---- vocabulary / params ----------------------------------------------------

void vocabulary::validate() const {
  if (size < 2) throw std::invalid_argument("vocabulary size must be >= 2");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
}

std::optional<uint64_t> vocabulary::space_size(uint64_t cap) const {
  uint64_t n = 1;
  for (int32_t t = 0; t < max_len; ++t) {
    if (n > cap / static_cast<uint64_t>(size)) return std::nullopt;
    n *= static_cast<uint64_t>(size);
  }
  if (n > cap) return std::nullopt;
  return n;
}

void decoding_config::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(top_p > 0.0) || top_p > 1.0) throw std::invalid_argument("top_p must be in (0, 1]");
}

std::string to_string(policy_class c) {
  switch (c) {
    case policy_class::independent_bandit: return "independent_bandit";
    case policy_class::shared_feature_linear: return "shared_feature_linear";
    case policy_class::autoregressive_tabular: return "autoregressive_tabular";
  }
  throw std::logic_error("bad policy_class");
}

policy_class policy_class_from_string(const std::string& s) {
  if (s == "independent_bandit") return policy_class::independent_bandit;
  if (s == "shared_feature_linear") return policy_class::shared_feature_linear;
  if (s == "autoregressive_tabular") return policy_class::autoregressive_tabular;
  throw std::invalid_argument("unknown policy class: " + s);
}

size_t policy_params::expected_dim() const {
  const size_t V = static_cast<size_t>(vocab.size);
  const size_t Q = static_cast<size_t>(num_queries);
  switch (cls) {
    case policy_class::independent_bandit: return Q * V;
    case policy_class::shared_feature_linear: {
      // theta is as large as the feature maps demand
      int32_t mx = -1;
      for (const auto& row : feature)
        for (int32_t c : row) mx = std::max(mx, c);
      return static_cast<size_t>(mx + 1);
    }
    case policy_class::autoregressive_tabular: return (Q + V) * V;
  }
  throw std::logic_error("bad policy_class");
}

void policy_params::validate() const {
  vocab.validate();
  if (num_queries < 1) throw std::invalid_argument("num_queries must be >= 1");
  const bool bandit_family = cls != policy_class::autoregressive_tabular;
  if (bandit_family && vocab.max_len != 1)
    throw std::invalid_argument(class_tag(cls) + " requires max_len = 1");
  if (cls == policy_class::shared_feature_linear) {
    if (feature.size() != static_cast<size_t>(num_queries))
      throw std::invalid_argument("feature maps: expected one row per query");
    for (const auto& row : feature) {
      if (row.size() != static_cast<size_t>(vocab.size))
        throw std::invalid_argument("feature row width must equal vocabulary size");
      std::vector<int32_t> sorted = row;
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front() < 0)
        throw std::invalid_argument("feature component indices must be nonnegative");
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("feature rows must be injective (one component per arm)");
    }
  } else if (!feature.empty()) {
    throw std::invalid_argument("feature maps are only valid for shared_feature_linear");
  }
  if (values.size() != expected_dim())
    throw std::invalid_argument("parameter vector has size " + std::to_string(values.size()) +
                                ", expected " + std::to_string(expected_dim()));
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("parameters must be finite");
}

policy_params make_uniform_policy(policy_class cls, const vocabulary& vocab, int32_t num_queries) {
  vocab.validate();
  if (num_queries < 1) throw std::invalid_argument("num_queries must be >= 1");
  policy_params p;
  p.cls = cls;
  p.vocab = vocab;
  p.num_queries = num_queries;
  const size_t V = static_cast<size_t>(vocab.size);
  const size_t Q = static_cast<size_t>(num_queries);
  switch (cls) {
    case policy_class::independent_bandit:
      p.values.assign(Q * V, 0.0);
      break;
    case policy_class::shared_feature_linear: {
      p.feature.assign(Q, std::vector<int32_t>(V));
      for (auto& row : p.feature) std::iota(row.begin(), row.end(), 0);
      p.values.assign(V, 0.0);
      break;
    }
    case policy_class::autoregressive_tabular:
      p.values.assign((Q + V) * V, 0.0);
      break;
  }
  p.validate();
  return p;
}

// ---- core operations ---------------------------------------------------------

sampled_response sample_response(const policy_params& params, int32_t query,
                                 const decoding_config& decoding, random_stream& rng) {
  decoding.validate();
  check_query(params, query);
  sampled_response out;
  const int32_t V = params.vocab.size;

  std::vector<double> probs(static_cast<size_t>(V));
  std::vector<int32_t> order;

  for (int32_t t = 0; t < params.vocab.max_len; ++t) {
    const context_ref ctx = next_token_context(params, query, out.tokens, static_cast<size_t>(t));
    check_finite_context(params, ctx, query, out.tokens, static_cast<size_t>(t));
    const double lse = context_log_norm(ctx, V);

    // sampling distribution: temperature-scaled softmax, optionally truncated
    // to the smallest top-p nucleus and renormalized
    if (decoding.temperature == 1.0) {
      for (int32_t a = 0; a < V; ++a) probs[static_cast<size_t>(a)] = std::exp(ctx.logit(a) - lse);
    } else {
      double mx = -std::numeric_limits<double>::infinity();
      for (int32_t a = 0; a < V; ++a) mx = std::max(mx, ctx.logit(a) / decoding.temperature);
      double s = 0.0;
      for (int32_t a = 0; a < V; ++a) {
        probs[static_cast<size_t>(a)] = std::exp(ctx.logit(a) / decoding.temperature - mx);
        s += probs[static_cast<size_t>(a)];
      }
      for (int32_t a = 0; a < V; ++a) probs[static_cast<size_t>(a)] /= s;
    }

    int32_t tok;
    if (decoding.top_p < 1.0) {
      order.resize(static_cast<size_t>(V));
      std::iota(order.begin(), order.end(), 0);
      // descending probability, ascending index on ties: deterministic nucleus
      std::stable_sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)];
      });
      double mass = 0.0;
      size_t keep = 0;
      while (keep < order.size()) {
        mass += probs[static_cast<size_t>(order[keep])];
        ++keep;
        if (mass >= decoding.top_p) break;
      }
      const double u = rng.uniform01() * mass;
      double cum = 0.0;
      tok = order[keep - 1];
      for (size_t i = 0; i < keep; ++i) {
        cum += probs[static_cast<size_t>(order[i])];
        if (u < cum) {
          tok = order[i];
          break;
        }
      }
    } else {
      const double u = rng.uniform01();
      double cum = 0.0;
      tok = V - 1;
      for (int32_t a = 0; a < V; ++a) {
        cum += probs[static_cast<size_t>(a)];
        if (u < cum) {
          tok = a;
          break;
        }
      }
    }

    out.tokens.push_back(tok);
    out.logprobs.push_back(ctx.logit(tok) - lse);  // model log-prob, untempered
  }
  return out;
}

double logprob(const policy_params& params, int32_t query, const token_seq& response) {
  check_query(params, query);
  check_response(params, response);
  double lp = 0.0;
  for (size_t t = 0; t < response.size(); ++t) {
    const context_ref ctx = next_token_context(params, query, response, t);
    lp += ctx.logit(response[t]) - context_log_norm(ctx, params.vocab.size);
  }
  return lp;
}

std::vector<double> per_token_logprobs(const policy_params& params, int32_t query,
                                       const token_seq& response) {
  check_query(params, query);
  check_response(params, response);
  std::vector<double> out(response.size());
  for (size_t t = 0; t < response.size(); ++t) {
    const context_ref ctx = next_token_context(params, query, response, t);
    out[t] = ctx.logit(response[t]) - context_log_norm(ctx, params.vocab.size);
  }
  return out;
}

void logprob_grad_weighted(const policy_params& params, int32_t query, const token_seq& response,
                           const std::vector<double>& token_coeffs, grad_accum& g) {
  check_query(params, query);
  check_response(params, response);
  if (token_coeffs.size() != response.size())
    throw std::invalid_argument("one token coefficient per response token required");
  if (g.dim() != params.dim()) throw std::invalid_argument("grad_accum dimension mismatch");
  const int32_t V = params.vocab.size;
  for (size_t t = 0; t < response.size(); ++t) {
    const double coeff = token_coeffs[t];
    if (coeff == 0.0) continue;
    const context_ref ctx = next_token_context(params, query, response, t);
    const double lse = context_log_norm(ctx, V);
    for (int32_t a = 0; a < V; ++a) {
      const double pa = std::exp(ctx.logit(a) - lse);
      const double ind = (a == response[t]) ? 1.0 : 0.0;
      g.add(ctx.param_index(a), coeff * (ind - pa));
    }
  }
}

void logprob_grad(const policy_params& params, int32_t query, const token_seq& response,
                  double coeff, grad_accum& g) {
  logprob_grad_weighted(params, query, response, std::vector<double>(response.size(), coeff), g);
}

entropy_estimate entropy(const policy_params& params, int32_t query) {
  check_query(params, query);
  const int32_t V = params.vocab.size;

  // entropy of one context's softmax: lse - sum p * logit
  const auto context_entropy = [&](const context_ref& ctx, std::vector<double>* probs) {
    const double lse = context_log_norm(ctx, V);
    double h = 0.0;
    for (int32_t a = 0; a < V; ++a) {
      const double pa = std::exp(ctx.logit(a) - lse);
      if (probs) (*probs)[static_cast<size_t>(a)] = pa;
      if (pa > 0.0) h -= pa * (ctx.logit(a) - lse);
    }
    return h;
  };

  // chain rule over the sequence: H(o) = sum_t E_{prefix}[H(token_t | prefix)].
  // Conditioning collapses to the last token, so a marginal over V states is
  // enough and the DP is exact for every tabular class.
  token_seq probe(1, 0);
  entropy_estimate out;
  std::vector<double> state(static_cast<size_t>(V), 0.0);
  {
    const context_ref ctx = next_token_context(params, query, probe, 0);
    out.value = context_entropy(ctx, &state);
  }
  for (int32_t t = 1; t < params.vocab.max_len; ++t) {
    std::vector<double> next(static_cast<size_t>(V), 0.0);
    std::vector<double> row(static_cast<size_t>(V), 0.0);
    for (int32_t s = 0; s < V; ++s) {
      const double w = state[static_cast<size_t>(s)];
      if (w == 0.0) continue;
      probe[0] = s;
      const context_ref ctx = next_token_context(params, query, probe, 1);
      out.value += w * context_entropy(ctx, &row);
      for (int32_t a = 0; a < V; ++a) next[static_cast<size_t>(a)] += w * row[static_cast<size_t>(a)];
    }
    state.swap(next);
  }
  return out;
}

double exact_pass_prob(const policy_params& params, int32_t query,
                       const std::vector<token_seq>& answers) {
  double s = 0.0;
  for (const auto& a : answers) s += std::exp(logprob(params, query, a));
  return s;
}

std::vector<token_seq> enumerate_responses(const vocabulary& vocab, uint64_t cap) {
  vocab.validate();
  const auto n = vocab.space_size(cap);
  if (!n) {
    // recompute the true size (saturating) for the diagnostic
    long double sz = 1.0L;
    for (int32_t t = 0; t < vocab.max_len; ++t) sz *= vocab.size;
    std::ostringstream os;
    os << "response space has " << static_cast<unsigned long long>(std::min<long double>(sz, 1e18L))
       << " sequences, above the enumeration cap of " << cap;
    throw std::length_error(os.str());
  }
  std::vector<token_seq> out;
  out.reserve(static_cast<size_t>(*n));
  token_seq cur(static_cast<size_t>(vocab.max_len), 0);
  for (uint64_t i = 0; i < *n; ++i) {
    out.push_back(cur);
    // increment as a base-V counter, least significant position last
    for (int32_t pos = vocab.max_len - 1; pos >= 0; --pos) {
      if (++cur[static_cast<size_t>(pos)] < vocab.size) break;
      cur[static_cast<size_t>(pos)] = 0;
    }
  }
  return out;
}

// ---- checkpoints --------------------------------------------------------------

std::string checkpoint_to_json(const policy_params& params) {
  params.validate();
  json j;
  j["format_version"] = kCheckpointVersion;
  j["class"] = to_string(params.cls);
  j["vocabulary"] = {{"size", params.vocab.size}, {"max_len", params.vocab.max_len}};
  j["num_queries"] = params.num_queries;
  json pj;
  const size_t V = static_cast<size_t>(params.vocab.size);
  switch (params.cls) {
    case policy_class::independent_bandit:
    case policy_class::autoregressive_tabular: {
      // nested rows: per query (bandit) or per state (autoregressive)
      json rows = json::array();
      for (size_t base = 0; base < params.values.size(); base += V) {
        json row = json::array();
        for (size_t a = 0; a < V; ++a) row.push_back(params.values[base + a]);
        rows.push_back(std::move(row));
      }
      pj["logits"] = std::move(rows);
      break;
    }
    case policy_class::shared_feature_linear: {
      pj["theta"] = params.values;
      json rows = json::array();
      for (const auto& row : params.feature) rows.push_back(row);
      pj["feature"] = std::move(rows);
      break;
    }
  }
  j["params"] = std::move(pj);
  return j.dump(2);
}

policy_params checkpoint_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.at("format_version").get<int32_t>() != kCheckpointVersion)
    throw std::invalid_argument("unsupported checkpoint format_version");
  policy_params p;
  p.cls = policy_class_from_string(j.at("class").get<std::string>());
  p.vocab.size = j.at("vocabulary").at("size").get<int32_t>();
  p.vocab.max_len = j.at("vocabulary").at("max_len").get<int32_t>();
  p.num_queries = j.at("num_queries").get<int32_t>();
  const json& pj = j.at("params");
  switch (p.cls) {
    case policy_class::independent_bandit:
    case policy_class::autoregressive_tabular: {
      for (const auto& row : pj.at("logits"))
        for (const auto& v : row) p.values.push_back(v.get<double>());
      break;
    }
    case policy_class::shared_feature_linear: {
      p.values = pj.at("theta").get<std::vector<double>>();
      for (const auto& row : pj.at("feature"))
        p.feature.push_back(row.get<std::vector<int32_t>>());
      break;
    }
  }
  p.validate();
  return p;
}

void save_checkpoint(const policy_params& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f << checkpoint_to_json(params) << '\n';
  if (!f) throw std::runtime_error("write failed: " + path);
}

policy_params load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return checkpoint_from_json(os.str());
}

}  // namespace rlsim
