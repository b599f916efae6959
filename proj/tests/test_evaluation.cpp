#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "rlsim/evaluation.hpp"

using namespace rlsim;

namespace {

curve curve_from(const std::vector<double>& train_pass1) {
  curve c;
  for (size_t i = 0; i < train_pass1.size(); ++i) {
    eval_record r;
    r.round = static_cast<int64_t>(i);
    r.train_pass1 = train_pass1[i];
    c.push_back(r);
  }
  return c;
}

}  // namespace

TEST_CASE("eval_train_pass1: deterministic policies give exactly 0 or 1") {
  policy_params p = make_uniform_policy(policy_class::independent_bandit, {4, 1}, 1);
  p.values[3] = 1000.0;  // all mass on arm 3
  task t;
  t.query = 0;
  t.answers = {{3}};
  random_stream rng(1);
  CHECK(eval_train_pass1(p, t, 100, rng) == 1.0);
  t.answers = {{0}};
  CHECK(eval_train_pass1(p, t, 100, rng) == 0.0);
}

TEST_CASE("eval_train_pass1: unbiased against the exact pass probability") {
  // 4-sigma binomial band around p for a few calibrated targets
  for (double target : {0.05, 0.1, 0.5, 0.9}) {
    policy_params p = make_uniform_policy(policy_class::independent_bandit, {64, 1}, 1);
    task t;
    t.query = 0;
    t.answers = {{7}};
    calibrate_difficulty(p, 0, t.answers, target, default_calibration_tol(p.cls));
    random_stream rng(static_cast<uint64_t>(target * 1e6));
    const int n = 10000;
    const double est = eval_train_pass1(p, t, n, rng);
    CHECK(std::abs(est - target) <= oracles::binom_4sigma(target, n));
  }
}

TEST_CASE("eval_train_pass1: metric does not change the estimate, only correctness counts") {
  policy_params p = make_uniform_policy(policy_class::independent_bandit, {4, 1}, 1);
  task t;
  t.query = 0;
  t.answers = {{1}, {2}};
  t.metric = reward_metric::neg_one_zero;
  random_stream a(9), b(9);
  const double with_neg = eval_train_pass1(p, t, 500, a);
  t.metric = reward_metric::zero_one;
  CHECK(eval_train_pass1(p, t, 500, b) == with_neg);
  CHECK(std::abs(with_neg - 0.5) <= oracles::binom_4sigma(0.5, 500));
}

TEST_CASE("eval_test_pass1: one draw per task, stream order is task order") {
  taskgen_config cfg;
  cfg.vocab = {32, 1};
  cfg.num_test_tasks = 40;
  random_stream rng(77);
  environment env = generate_environment(cfg, rng);

  random_stream e1(5), e2(5);
  const double v1 = eval_test_pass1(env.base_params, env.tasks, e1);
  const double v2 = eval_test_pass1(env.base_params, env.tasks, e2);
  CHECK(v1 == v2);  // same stream, same value
  CHECK(v1 >= 0.0);
  CHECK(v1 <= 1.0);
  // 40 tasks, one draw each: the value is a multiple of 1/40
  CHECK(std::abs(v1 * 40.0 - std::round(v1 * 40.0)) <= 1e-12);
}

TEST_CASE("eval_test_pass1: mean over many repetitions tracks the exact test mean") {
  taskgen_config cfg;
  cfg.vocab = {16, 1};
  cfg.num_test_tasks = 10;
  cfg.difficulty_target = 0.3;
  random_stream rng(78);
  environment env = generate_environment(cfg, rng);

  const double exact = exact_test_pass_mean(env.base_params, env.tasks);
  CHECK(exact == doctest::Approx(0.3).epsilon(1e-6));  // calibration fixes each task at 0.3

  random_stream erng(79);
  const int reps = 4000;
  double acc = 0.0;
  for (int i = 0; i < reps; ++i) acc += eval_test_pass1(env.base_params, env.tasks, erng);
  acc /= reps;
  // each rep averages 10 Bernoulli(0.3) draws; 4-sigma on the pooled estimate
  CHECK(std::abs(acc - exact) <= oracles::binom_4sigma(exact, reps * 10));
}

TEST_CASE("exact_test_pass_mean: averages exact_pass_prob over test tasks only") {
  taskgen_config cfg;
  cfg.vocab = {8, 1};
  cfg.num_test_tasks = 3;
  cfg.difficulty_target = 0.2;
  random_stream rng(80);
  environment env = generate_environment(cfg, rng);

  double acc = 0.0;
  for (int32_t idx : env.tasks.test_indices) {
    const task& t = env.tasks.tasks[static_cast<size_t>(idx)];
    acc += exact_pass_prob(env.base_params, t.query, t.answers);
  }
  acc /= static_cast<double>(env.tasks.test_indices.size());
  CHECK(exact_test_pass_mean(env.base_params, env.tasks) == doctest::Approx(acc).epsilon(1e-15));
}

TEST_CASE("detect_convergence: crossing at round 37 and staying") {
  std::vector<double> tp(100, 0.5);
  for (size_t i = 37; i < tp.size(); ++i) tp[i] = 0.995;
  const curve c = curve_from(tp);
  auto hit = detect_convergence(c, 0.99, 5);
  REQUIRE(hit.has_value());
  CHECK(*hit == 37);
}

TEST_CASE("detect_convergence: pinned at 1.0 from the start converges at round 0") {
  const curve c = curve_from(std::vector<double>(10, 1.0));
  auto hit = detect_convergence(c, 0.99, 5);
  REQUIRE(hit.has_value());
  CHECK(*hit == 0);
}

TEST_CASE("detect_convergence: dips reset the patience window") {
  // above threshold for 4, dip, then above for 5: the window restarts after the dip
  std::vector<double> tp = {1, 1, 1, 1, 0.5, 1, 1, 1, 1, 1};
  auto hit = detect_convergence(curve_from(tp), 0.99, 5);
  REQUIRE(hit.has_value());
  CHECK(*hit == 5);

  // never 5 in a row
  std::vector<double> never = {1, 1, 1, 1, 0.5, 1, 1, 1, 1, 0.5};
  CHECK(!detect_convergence(curve_from(never), 0.99, 5).has_value());
}

TEST_CASE("detect_convergence: returns the record's round number, not its index") {
  curve c;
  for (int i = 0; i < 8; ++i) {
    eval_record r;
    r.round = i * 10;  // eval_every = 10
    r.train_pass1 = i >= 3 ? 1.0 : 0.0;
    c.push_back(r);
  }
  auto hit = detect_convergence(c, 0.99, 5);
  REQUIRE(hit.has_value());
  CHECK(*hit == 30);
}

TEST_CASE("detect_convergence: short curves and exact-threshold values") {
  CHECK(!detect_convergence(curve_from({1, 1, 1, 1}), 0.99, 5).has_value());
  CHECK(!detect_convergence({}, 0.99, 5).has_value());
  // >= comparison: exactly 0.99 counts
  CHECK(detect_convergence(curve_from({0.99, 0.99, 0.99, 0.99, 0.99}), 0.99, 5).value() == 0);
  // patience 1: first crossing wins
  CHECK(detect_convergence(curve_from({0.1, 0.99}), 0.99, 1).value() == 1);
}

TEST_CASE("eval_config validation") {
  eval_config cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_train_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.convergence_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.convergence_patience = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.eval_every = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
