#include "rlsim/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rlsim {

namespace {

using json = nlohmann::ordered_json;

bool is_bandit_family(policy_class cls) { return cls != policy_class::autoregressive_tabular; }

// parameter index of the logit behind (query, arm) for single-token classes
size_t arm_param_index(const policy_params& p, int32_t query, int32_t arm) {
  if (p.cls == policy_class::shared_feature_linear)
    return static_cast<size_t>(p.feature[static_cast<size_t>(query)][arm]);
  return static_cast<size_t>(query) * static_cast<size_t>(p.vocab.size) +
         static_cast<size_t>(arm);
}

// parameter indices along an answer path for the autoregressive class
std::set<size_t> answer_path_edges(const policy_params& p, int32_t query,
                                   const std::vector<token_seq>& answers, bool initial_only) {
  const size_t V = static_cast<size_t>(p.vocab.size);
  const size_t Q = static_cast<size_t>(p.num_queries);
  std::set<size_t> edges;
  for (const auto& a : answers) {
    edges.insert(static_cast<size_t>(query) * V + static_cast<size_t>(a[0]));
    if (initial_only) continue;
    for (size_t t = 1; t < a.size(); ++t)
      edges.insert((Q + static_cast<size_t>(a[t - 1])) * V + static_cast<size_t>(a[t]));
  }
  return edges;
}

// set every edge logit to x and report the resulting pass probability
double pass_with_offset(policy_params& p, int32_t query, const std::vector<token_seq>& answers,
                        const std::set<size_t>& edges, double x) {
  for (size_t e : edges) p.values[e] = x;
  return exact_pass_prob(p, query, answers);
}

// bisection for the autoregressive classes: monotone in the shared offset
double bisect_offset(policy_params& p, int32_t query, const std::vector<token_seq>& answers,
                     const std::set<size_t>& edges, double target, double tol, bool clamp,
                     double* achieved) {
  const double lo_x = -60.0, hi_x = 60.0;
  const double f_lo = pass_with_offset(p, query, answers, edges, lo_x);
  const double f_hi = pass_with_offset(p, query, answers, edges, hi_x);
  if (target < f_lo || target > f_hi) {
    if (!clamp) {
      std::ostringstream os;
      os << "difficulty target " << target << " unreachable; feasible range is [" << f_lo << ", "
         << f_hi << "]";
      throw std::domain_error(os.str());
    }
    const double x = (target > f_hi) ? hi_x : lo_x;
    *achieved = pass_with_offset(p, query, answers, edges, x);
    return x;
  }
  double lo = lo_x, hi = hi_x, mid = 0.0;
  for (int it = 0; it < 100; ++it) {
    mid = 0.5 * (lo + hi);
    const double f = pass_with_offset(p, query, answers, edges, mid);
    if (std::abs(f - target) <= tol) break;
    (f < target ? lo : hi) = mid;
  }
  *achieved = pass_with_offset(p, query, answers, edges, mid);
  return mid;
}

// Candidate answer. Answers use distinct tokens within a sequence: a repeated
// token would visit the same transition row twice demanding different
// continuations, which caps the answer's reachable pass probability below 1
// (p * q <= 1/4 for two outputs of one softmax) and so breaks calibration to
// high targets. Distinct tokens keep every row on the answer path distinct.
token_seq random_answer(const vocabulary& vocab, random_stream& rng) {
  token_seq r;
  r.reserve(static_cast<size_t>(vocab.max_len));
  while (static_cast<int32_t>(r.size()) < vocab.max_len) {
    const auto tok = static_cast<int32_t>(rng.uniform_below(static_cast<uint64_t>(vocab.size)));
    if (std::find(r.begin(), r.end(), tok) == r.end()) r.push_back(tok);
  }
  return r;
}

// m distinct answers, sorted
std::vector<token_seq> draw_answers(const vocabulary& vocab, int32_t m, random_stream& rng) {
  std::set<token_seq> uniq;
  while (static_cast<int32_t>(uniq.size()) < m) uniq.insert(random_answer(vocab, rng));
  return {uniq.begin(), uniq.end()};
}

}  // namespace

// ---- metric / task basics -----------------------------------------------------

std::string to_string(reward_metric m) {
  return m == reward_metric::zero_one ? "zero_one" : "neg_one_zero";
}

reward_metric reward_metric_from_string(const std::string& s) {
  if (s == "zero_one") return reward_metric::zero_one;
  if (s == "neg_one_zero") return reward_metric::neg_one_zero;
  throw std::invalid_argument("unknown reward metric: " + s);
}

void task::validate(const vocabulary& vocab) const {
  if (query < 0) throw std::invalid_argument("task query must be nonnegative");
  if (answers.empty()) throw std::invalid_argument("task must have at least one answer");
  if (!std::is_sorted(answers.begin(), answers.end()))
    throw std::invalid_argument("task answers must be sorted");
  if (std::adjacent_find(answers.begin(), answers.end()) != answers.end())
    throw std::invalid_argument("task answers must be distinct");
  for (const auto& a : answers) {
    if (a.empty() || static_cast<int32_t>(a.size()) > vocab.max_len)
      throw std::invalid_argument("answer length outside [1, max_len]");
    for (int32_t tok : a)
      if (tok < 0 || tok >= vocab.size)
        throw std::invalid_argument("answer token outside vocabulary");
  }
}

void task_set::validate() const {
  if (tasks.empty()) throw std::invalid_argument("task set is empty");
  if (train_index < 0 || static_cast<size_t>(train_index) >= tasks.size())
    throw std::invalid_argument("train_index out of range");
  if (test_indices.empty()) throw std::invalid_argument("task set needs at least one test task");
  for (int32_t i : test_indices) {
    if (i < 0 || static_cast<size_t>(i) >= tasks.size())
      throw std::invalid_argument("test index out of range");
    if (i == train_index) throw std::invalid_argument("train task cannot also be a test task");
  }
}

bool is_correct(const task& t, const token_seq& response) {
  return std::binary_search(t.answers.begin(), t.answers.end(), response);
}

int score(const task& t, const token_seq& response) {
  const bool hit = is_correct(t, response);
  if (t.metric == reward_metric::zero_one) return hit ? 1 : 0;
  return hit ? 0 : -1;
}

// ---- calibration ----------------------------------------------------------------

double default_calibration_tol(policy_class cls) {
  return is_bandit_family(cls) ? 1e-6 : 1e-4;
}

void calibrate_difficulty(policy_params& params, int32_t query,
                          const std::vector<token_seq>& answers, double target, double tol) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("difficulty target must be in (0, 1)");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (answers.empty()) throw std::invalid_argument("calibration needs at least one answer");

  if (is_bandit_family(params.cls)) {
    // closed form: with answer logits set to a common offset x and the other
    // arms untouched, pass = m e^x / (m e^x + S) where S sums the non-answer
    // arms' exp(logit); solve x = log(target S / (m (1 - target)))
    const int32_t K = params.vocab.size;
    std::set<int32_t> answer_arms;
    for (const auto& a : answers) answer_arms.insert(a.at(0));
    const auto m = static_cast<double>(answer_arms.size());
    double s = 0.0;
    for (int32_t arm = 0; arm < K; ++arm)
      if (!answer_arms.count(arm)) s += std::exp(params.values[arm_param_index(params, query, arm)]);
    if (s == 0.0)
      throw std::domain_error(
          "difficulty target unreachable: every arm is an answer, feasible pass probability is "
          "exactly 1");
    const double offset = std::log(target * s / (m * (1.0 - target)));
    for (int32_t arm : answer_arms) params.values[arm_param_index(params, query, arm)] = offset;
  } else {
    const std::set<size_t> edges = answer_path_edges(params, query, answers, false);
    double achieved = 0.0;
    bisect_offset(params, query, answers, edges, target, tol, false, &achieved);
  }

  const double achieved = exact_pass_prob(params, query, answers);
  if (std::abs(achieved - target) > tol) {
    std::ostringstream os;
    os << "calibration missed the target: wanted " << target << " within " << tol << ", reached "
       << achieved;
    throw std::domain_error(os.str());
  }
}

double measure_difficulty(const policy_params& params, const task& t, int n, random_stream& rng) {
  if (n < 1) throw std::invalid_argument("measure_difficulty needs n >= 1");
  const decoding_config decoding;  // standard sampling parameters
  int hits = 0;
  for (int i = 0; i < n; ++i)
    hits += is_correct(t, sample_response(params, t.query, decoding, rng).tokens);
  return static_cast<double>(hits) / static_cast<double>(n);
}

// ---- task/policy construction -----------------------------------------------------

void taskgen_config::validate() const {
  vocab.validate();
  if (is_bandit_family(cls) && vocab.max_len != 1)
    throw std::invalid_argument("bandit-family task generation requires max_len = 1");
  if (cls == policy_class::autoregressive_tabular && vocab.size < vocab.max_len)
    throw std::invalid_argument(
        "autoregressive task generation needs vocabulary size >= max_len (answers use distinct "
        "tokens)");
  if (num_test_tasks < 1) throw std::invalid_argument("need at least one test task");
  if (answers_per_task < 1) throw std::invalid_argument("need at least one answer per task");
  const auto space = vocab.space_size(1ull << 62);
  if (space && static_cast<uint64_t>(answers_per_task) >= *space)
    throw std::invalid_argument("answers_per_task must leave at least one incorrect response");
  if (feature_overlap < 0.0 || feature_overlap > 1.0)
    throw std::invalid_argument("feature_overlap must be in [0, 1]");
  if (!(difficulty_target > 0.0 && difficulty_target < 1.0))
    throw std::invalid_argument("difficulty target must be in (0, 1)");
}

task_set generate_tasks(const taskgen_config& cfg, random_stream& rng) {
  cfg.validate();
  task_set ts;
  const int32_t total = 1 + cfg.num_test_tasks;
  ts.tasks.resize(static_cast<size_t>(total));
  ts.train_index = 0;
  for (int32_t i = 1; i < total; ++i) ts.test_indices.push_back(i);

  task& train = ts.tasks[0];
  train.query = 0;
  train.answers = draw_answers(cfg.vocab, cfg.answers_per_task, rng);
  train.metric = cfg.metric;
  train.target_base_pass1 = cfg.difficulty_target;
  train.feature_overlap = 1.0;  // the train task trivially shares its own structure

  for (int32_t qi = 1; qi < total; ++qi) {
    task& t = ts.tasks[static_cast<size_t>(qi)];
    t.query = qi;
    t.metric = cfg.metric;
    t.target_base_pass1 = cfg.difficulty_target;
    t.feature_overlap = cfg.feature_overlap;

    // Paired phase: answer j may reuse structure from train answer j with
    // probability overlap. Autoregressive reuse keeps the train suffix behind
    // a fresh first token; bandit-family reuse keeps the arm index itself
    // (component aliasing for shared features is decided in build_policy).
    // Any remaining slots are filled with fresh random responses.
    std::set<token_seq> uniq;
    for (const auto& train_answer : train.answers) {
      if (static_cast<int32_t>(uniq.size()) >= cfg.answers_per_task) break;
      if (rng.uniform01() >= cfg.feature_overlap) continue;
      token_seq a = train_answer;
      if (cfg.cls == policy_class::autoregressive_tabular && a.size() > 1) {
        // fresh first token, avoiding the row conflict a[0] == a[1]
        do {
          a[0] = static_cast<int32_t>(rng.uniform_below(static_cast<uint64_t>(cfg.vocab.size)));
        } while (a[0] == a[1]);
      }
      uniq.insert(std::move(a));
    }
    while (static_cast<int32_t>(uniq.size()) < cfg.answers_per_task)
      uniq.insert(random_answer(cfg.vocab, rng));
    t.answers.assign(uniq.begin(), uniq.end());
  }
  ts.validate();
  return ts;
}

policy_params build_policy(const taskgen_config& cfg, task_set& tasks, random_stream& rng) {
  cfg.validate();
  tasks.validate();
  const int32_t total = static_cast<int32_t>(tasks.tasks.size());
  policy_params p = make_uniform_policy(cfg.cls, cfg.vocab, total);

  if (cfg.cls == policy_class::shared_feature_linear) {
    // train row keeps the identity wiring; test rows mix aliases into the
    // train row's components with private components elsewhere
    const int32_t K = cfg.vocab.size;
    const task& train = tasks.train();
    std::vector<int32_t> train_answer_arms;
    for (const auto& a : train.answers) train_answer_arms.push_back(a[0]);
    std::sort(train_answer_arms.begin(), train_answer_arms.end());
    std::vector<int32_t> train_other;
    for (int32_t arm = 0; arm < K; ++arm)
      if (!std::binary_search(train_answer_arms.begin(), train_answer_arms.end(), arm))
        train_other.push_back(arm);  // identity wiring: component == arm

    int32_t next_component = K;
    for (int32_t qi : tasks.test_indices) {
      const task& t = tasks.tasks[static_cast<size_t>(qi)];
      auto& row = p.feature[static_cast<size_t>(qi)];
      std::fill(row.begin(), row.end(), -1);

      // answer arms pair with the train task's answer arms, sorted order
      std::vector<int32_t> test_answer_arms;
      for (const auto& a : t.answers) test_answer_arms.push_back(a[0]);
      std::sort(test_answer_arms.begin(), test_answer_arms.end());
      for (size_t j = 0; j < test_answer_arms.size(); ++j) {
        const bool alias = rng.uniform01() < t.feature_overlap && j < train_answer_arms.size();
        row[static_cast<size_t>(test_answer_arms[j])] =
            alias ? train_answer_arms[j] : next_component++;
      }

      // non-answer arms: aliased ones take a random bijection into the train
      // row's non-answer components, the rest get private components
      std::vector<int32_t> aliased_arms;
      for (int32_t arm = 0; arm < K; ++arm) {
        if (row[static_cast<size_t>(arm)] >= 0) continue;  // answer arm, already wired
        if (rng.uniform01() < t.feature_overlap)
          aliased_arms.push_back(arm);
        else
          row[static_cast<size_t>(arm)] = next_component++;
      }
      std::vector<int32_t> pool = train_other;
      rng.shuffle(pool);
      for (size_t i = 0; i < aliased_arms.size(); ++i)
        row[static_cast<size_t>(aliased_arms[i])] = pool[i];
    }
    p.values.assign(static_cast<size_t>(next_component), 0.0);
    p.validate();
  }

  // difficulty: train task first (must hit the target), then each test task
  // difficulty targets themselves stay as declared (calibration is checked to
  // hit them within tol), so a saved task set rebuilds the same policy
  // bit-for-bit; only clamped autoregressive test tasks record what the
  // adjustable edge could actually reach
  const double tol = default_calibration_tol(cfg.cls);
  const task& train = tasks.train();
  calibrate_difficulty(p, train.query, train.answers, train.target_base_pass1, tol);

  for (int32_t qi : tasks.test_indices) {
    task& t = tasks.tasks[static_cast<size_t>(qi)];
    if (cfg.cls == policy_class::autoregressive_tabular) {
      // only the private initial edge is adjustable; clamp to what it can reach
      const std::set<size_t> edges = answer_path_edges(p, t.query, t.answers, true);
      double achieved = 0.0;
      bisect_offset(p, t.query, t.answers, edges, t.target_base_pass1, tol, true, &achieved);
      t.target_base_pass1 = achieved;
    } else {
      calibrate_difficulty(p, t.query, t.answers, t.target_base_pass1, tol);
    }
  }
  return p;
}

environment generate_environment(const taskgen_config& cfg, random_stream& rng) {
  environment env;
  env.tasks = generate_tasks(cfg, rng);
  env.base_params = build_policy(cfg, env.tasks, rng);
  return env;
}

// ---- task-set files -----------------------------------------------------------------

std::string taskset_to_json(const task_set& ts) {
  json j;
  json tasks = json::array();
  for (const auto& t : ts.tasks) {
    json tj;
    tj["query"] = t.query;
    tj["answers"] = t.answers;
    tj["metric"] = to_string(t.metric);
    tj["target_base_pass1"] = t.target_base_pass1;
    tj["feature_overlap"] = t.feature_overlap;
    tasks.push_back(std::move(tj));
  }
  j["tasks"] = std::move(tasks);
  j["train_index"] = ts.train_index;
  j["test_indices"] = ts.test_indices;
  return j.dump(2);
}

task_set taskset_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  task_set ts;
  for (const auto& tj : j.at("tasks")) {
    task t;
    t.query = tj.at("query").get<int32_t>();
    for (const auto& aj : tj.at("answers")) t.answers.push_back(aj.get<token_seq>());
    t.metric = reward_metric_from_string(tj.at("metric").get<std::string>());
    t.target_base_pass1 = tj.at("target_base_pass1").get<double>();
    t.feature_overlap = tj.at("feature_overlap").get<double>();
    ts.tasks.push_back(std::move(t));
  }
  ts.train_index = j.at("train_index").get<int32_t>();
  ts.test_indices = j.at("test_indices").get<std::vector<int32_t>>();
  ts.validate();
  return ts;
}

void save_taskset(const task_set& ts, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open task set for writing: " + path);
  f << taskset_to_json(ts) << '\n';
  if (!f) throw std::runtime_error("write failed: " + path);
}

task_set load_taskset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open task set: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return taskset_from_json(os.str());
}

}  // namespace rlsim
