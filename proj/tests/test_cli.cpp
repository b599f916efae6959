#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "rlsim/cli.hpp"

using namespace rlsim;

namespace {

std::string bin() {
  const char* b = std::getenv("RLSIM_BIN");
  REQUIRE_MESSAGE(b != nullptr, "RLSIM_BIN must point at the rlsim binary (set by ctest)");
  return b;
}

struct cmd_result {
  int code = -1;
  std::string output;  // stdout + stderr interleaved
};

cmd_result run_cmd(const std::string& cmd) {
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int status = pclose(p);
  cmd_result r;
  r.output = out;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct temp_dir {
  std::filesystem::path path;
  explicit temp_dir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("rlsim_cli_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~temp_dir() { std::filesystem::remove_all(path); }
  std::string str(const std::string& rel = "") const { return (path / rel).string(); }
};

const char* kMiniConfig =
    "# small shared-feature environment for fast end-to-end runs\n"
    "preset=custom\n"
    "task.vocab_size=64\n"
    "task.num_test_tasks=4\n"
    "task.difficulty_target=0.4\n"
    "trainer.group_size=2\n"
    "eval.n_train_samples=25\n"
    "eval.convergence_threshold=0.9\n"
    "eval.convergence_patience=3\n"
    "run.horizon=40\n"
    "run.grace=5\n"
    "run.seeds=0,1\n";

std::string write_config(const temp_dir& tmp, const std::string& name, const std::string& text) {
  const std::string path = tmp.str(name);
  std::ofstream out(path);
  out << text;
  out.close();
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---- config parsing (direct) ------------------------------------------------

TEST_CASE("parse_config_text: comments, blanks, whitespace, and overrides") {
  const experiment_spec base = spec_from_preset(preset_id::exp1);
  const std::string text =
      "# comment line\n"
      "\n"
      "  trainer.group_size = 4   # trailing comment\n"
      "task.difficulty_target=0.03\n"
      "run.seeds=2,3\n";
  const experiment_spec s = parse_config_text(text, base);
  CHECK(s.trainer.group_size == 4);
  CHECK(s.task.difficulty_target == 0.03);
  CHECK(s.seeds == std::vector<int64_t>{2, 3});
  CHECK(s.preset == preset_id::exp1);  // untouched
}

TEST_CASE("parse_config_text: preset key rebases, later keys apply on top") {
  const experiment_spec base = spec_from_preset(preset_id::exp1);
  const experiment_spec s = parse_config_text("preset=exp3\ntrainer.kl_coef=0.01\n", base);
  CHECK(s.preset == preset_id::exp3);
  CHECK(s.trainer.group_size == 4);  // from the exp3 preset
  CHECK(s.trainer.kl_coef == 0.01);
}

TEST_CASE("parse_config_text: unknown keys and malformed lines carry line numbers") {
  const experiment_spec base = spec_from_preset(preset_id::exp1);
  CHECK_THROWS_WITH_AS(parse_config_text("trainer.group_size=1\nnot_a_key=3\n", base),
                       doctest::Contains("line 2"), config_error);
  CHECK_THROWS_WITH_AS(parse_config_text("\n\njust some words\n", base),
                       doctest::Contains("line 3"), config_error);
  CHECK_THROWS_WITH_AS(parse_config_text("trainer.group_size=abc\n", base),
                       doctest::Contains("trainer.group_size"), config_error);
  CHECK_THROWS_WITH_AS(parse_config_text("task.metric=sometimes\n", base),
                       doctest::Contains("task.metric"), config_error);
}

TEST_CASE("apply_config_key: every dump key round-trips") {
  const experiment_spec src = spec_from_preset(preset_id::exp2);
  experiment_spec dst = spec_from_preset(preset_id::exp1);
  std::istringstream in(dump_config(src));
  std::string line;
  while (std::getline(in, line)) {
    const size_t eq = line.find('=');
    apply_config_key(dst, line.substr(0, eq), line.substr(eq + 1), "test");
  }
  CHECK(spec_hash(dst) == spec_hash(src));
  CHECK(dump_config(dst) == dump_config(src));
}

TEST_CASE("config text from dump_config reloads to the identical spec hash") {
  experiment_spec src = spec_from_preset(preset_id::custom);
  src.task.vocab = {128, 1};
  src.task.difficulty_target = 0.25;
  src.trainer.opt.kind = optimizer_kind::sgd;
  src.seeds = {7};
  const experiment_spec back =
      parse_config_text(dump_config(src), spec_from_preset(preset_id::exp1));
  CHECK(spec_hash(back) == spec_hash(src));
}

// ---- binary end to end --------------------------------------------------------

TEST_CASE("run: end-to-end artifacts, exit 0, schema-clean CSV") {
  temp_dir tmp("run_e2e");
  const std::string cfg = write_config(tmp, "mini.cfg", kMiniConfig);
  const cmd_result r =
      run_cmd(bin() + " run --config " + cfg + " --out " + tmp.str("out") + " --workers 2");
  CAPTURE(r.output);
  REQUIRE(r.code == 0);

  CHECK(check_curves_csv(slurp(tmp.str("out/curves.csv"))).empty());
  CHECK(slurp(tmp.str("out/config.txt")).find("task.vocab_size=64") != std::string::npos);
  const auto rj = nlohmann::json::parse(slurp(tmp.str("out/report.json")));
  CHECK(rj.at("partial").get<bool>() == false);
  CHECK(rj.at("runs").size() == 2);
  CHECK(std::filesystem::exists(tmp.str("out/manifest.jsonl")));
  CHECK(std::filesystem::exists(tmp.str("out/taskset.json")));

  // table lands on stdout
  CHECK(r.output.find("custom-s0") != std::string::npos);
  CHECK(r.output.find("custom-s1") != std::string::npos);
}

TEST_CASE("run: --seeds takes a count or an explicit comma list") {
  temp_dir tmp("run_seeds");
  const std::string cfg = write_config(tmp, "mini.cfg", kMiniConfig);

  cmd_result r = run_cmd(bin() + " run --config " + cfg + " --seeds 3 --out " + tmp.str("a") +
                         " --dump-config");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("run.seeds=0,1,2\n") != std::string::npos);

  r = run_cmd(bin() + " run --config " + cfg + " --seeds 5,9 --out " + tmp.str("b") +
              " --dump-config");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("run.seeds=5,9\n") != std::string::npos);
}

TEST_CASE("run: --dump-config round-trips through --config byte for byte") {
  temp_dir tmp("roundtrip");
  const cmd_result first = run_cmd(bin() + " run --preset exp2 --dump-config");
  REQUIRE(first.code == 0);
  REQUIRE(first.output.find("preset=exp2") != std::string::npos);

  const std::string cfg = write_config(tmp, "dumped.cfg", first.output);
  const cmd_result second = run_cmd(bin() + " run --config " + cfg + " --dump-config");
  REQUIRE(second.code == 0);
  CHECK(second.output == first.output);
}

TEST_CASE("run: design overrides demote a named preset to custom, with a note") {
  const cmd_result r = run_cmd(bin() + " run --preset exp1 --difficulty 0.2 --dump-config");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("running as custom") != std::string::npos);
  CHECK(r.output.find("preset=custom\n") != std::string::npos);
  CHECK(r.output.find("task.difficulty_target=0.2\n") != std::string::npos);

  // matching the preset's own axis value keeps the label
  const cmd_result ok = run_cmd(bin() + " run --preset exp4 --difficulty 0.03 --dump-config");
  REQUIRE(ok.code == 0);
  CHECK(ok.output.find("preset=exp4\n") != std::string::npos);
}

TEST_CASE("run: exp2 is reproducible from custom via flag overrides") {
  const cmd_result r = run_cmd(
      bin() + " run --group-size 4 --advantage grpo --signal first --dump-config");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("trainer.group_size=4\n") != std::string::npos);
  CHECK(r.output.find("trainer.advantage=grpo\n") != std::string::npos);
  CHECK(r.output.find("trainer.signal=first\n") != std::string::npos);

  const cmd_result canon = run_cmd(bin() + " run --preset exp2 --dump-config");
  // same design; only the preset label (and the demotion note) differs
  const auto dump_sans_preset = [](const std::string& s) {
    std::string d = s.substr(s.find("eval."));  // first key of the sorted dump
    const size_t at = d.find("preset=");
    d.erase(at, d.find('\n', at) - at + 1);
    return d;
  };
  CHECK(dump_sans_preset(r.output) == dump_sans_preset(canon.output));
}

TEST_CASE("run: metric and policy flags use the short spellings") {
  cmd_result r = run_cmd(bin() + " run --metric neg10 --policy bandit --dump-config");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("task.metric=neg_one_zero\n") != std::string::npos);
  CHECK(r.output.find("task.class=independent_bandit\n") != std::string::npos);
  r = run_cmd(bin() + " run --metric 01 --policy autoreg --dump-config");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("task.metric=zero_one\n") != std::string::npos);
  CHECK(r.output.find("task.class=autoregressive_tabular\n") != std::string::npos);
  r = run_cmd(bin() + " run --metric maybe --dump-config");
  CHECK(r.code == 2);
}

TEST_CASE("run: config errors exit 2 with diagnostics") {
  temp_dir tmp("cfg_bad");
  const std::string bad = write_config(tmp, "bad.cfg", "trainer.group_size=2\nwat=1\n");
  cmd_result r = run_cmd(bin() + " run --config " + bad);
  CHECK(r.code == 2);
  CHECK(r.output.find("line 2") != std::string::npos);

  r = run_cmd(bin() + " run --config " + tmp.str("missing.cfg"));
  CHECK(r.code == 2);

  r = run_cmd(bin() + " run --preset exp9");
  CHECK(r.code == 2);

  const std::string invalid = write_config(tmp, "invalid.cfg",
                                           "preset=custom\ntrainer.group_size=1\n"
                                           "trainer.advantage=grpo\n");
  r = run_cmd(bin() + " run --config " + invalid);  // grpo needs G >= 2: spec-level rejection
  CHECK(r.code == 2);
}

TEST_CASE("run: RLFT_SIM_OUT supplies the output directory default") {
  temp_dir tmp("env_out");
  const std::string cfg = write_config(tmp, "mini.cfg", kMiniConfig);
  const cmd_result r =
      run_cmd("RLFT_SIM_OUT=" + tmp.str("env_dir") + " " + bin() + " run --config " + cfg);
  CAPTURE(r.output);
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(tmp.str("env_dir/curves.csv")));
}

TEST_CASE("sweep: one report per target, shared seeds; empty targets is a usage error") {
  temp_dir tmp("sweep");
  const std::string cfg = write_config(tmp, "mini.cfg", kMiniConfig);
  const cmd_result r = run_cmd(bin() + " sweep --config " + cfg + " --targets 0.3,0.5 --out " +
                               tmp.str("sw"));
  CAPTURE(r.output);
  REQUIRE(r.code == 0);

  int dirs = 0;
  std::vector<std::string> csvs;
  for (const auto& e : std::filesystem::directory_iterator(tmp.str("sw"))) {
    if (!e.is_directory()) continue;
    ++dirs;
    csvs.push_back(e.path().string() + "/curves.csv");
  }
  CHECK(dirs == 2);
  for (const auto& c : csvs) {
    REQUIRE(std::filesystem::exists(c));
    CHECK(check_curves_csv(slurp(c)).empty());
  }
  // shared seeds: both reports ran seeds 0 and 1
  for (const auto& e : std::filesystem::directory_iterator(tmp.str("sw"))) {
    if (!e.is_directory()) continue;
    const auto rj = nlohmann::json::parse(slurp(e.path().string() + "/report.json"));
    REQUIRE(rj.at("runs").size() == 2);
    CHECK(rj.at("runs")[0].at("seed").get<int>() == 0);
    CHECK(rj.at("runs")[1].at("seed").get<int>() == 1);
  }

  CHECK(run_cmd(bin() + " sweep --config " + cfg + " --targets '' --out " + tmp.str("e")).code ==
        2);
  CHECK(run_cmd(bin() + " sweep --config " + cfg + " --out " + tmp.str("e2")).code == 2);
}

TEST_CASE("report: summary table, schema verification, and pairwise comparison") {
  temp_dir tmp("report");
  const std::string cfg = write_config(tmp, "mini.cfg", kMiniConfig);
  REQUIRE(run_cmd(bin() + " run --config " + cfg + " --out " + tmp.str("a")).code == 0);
  REQUIRE(run_cmd(bin() + " run --config " + cfg + " --master-seed 99 --out " + tmp.str("b"))
              .code == 0);

  cmd_result r = run_cmd(bin() + " report " + tmp.str("a"));
  CAPTURE(r.output);
  REQUIRE(r.code == 0);
  CHECK(r.output.find("custom-s0") != std::string::npos);
  CHECK(r.output.find("custom-s1") != std::string::npos);
  CHECK(r.output.find("rounds") != std::string::npos);
  CHECK(r.output.find("rollouts") != std::string::npos);

  r = run_cmd(bin() + " report " + tmp.str("a") + " " + tmp.str("b"));
  CAPTURE(r.output);
  REQUIRE(r.code == 0);
  CHECK(r.output.find("comparison") != std::string::npos);
  CHECK(r.output.find("median rounds") != std::string::npos);

  // tampered header: schema error, exit 1
  std::string csv = slurp(tmp.str("a/curves.csv"));
  csv[0] = 'X';
  std::ofstream(tmp.str("a/curves.csv"), std::ios::trunc) << csv;
  r = run_cmd(bin() + " report " + tmp.str("a"));
  CHECK(r.code == 1);
  CHECK(r.output.find("header") != std::string::npos);

  r = run_cmd(bin() + " report " + tmp.str("nonexistent"));
  CHECK(r.code == 1);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run_cmd(bin()).code == 2);                  // no subcommand
  CHECK(run_cmd(bin() + " frobnicate").code == 2);  // unknown subcommand
  CHECK(run_cmd(bin() + " run --no-such-flag").code == 2);
  CHECK(run_cmd(bin() + " --help").code == 0);
  CHECK(run_cmd(bin() + " run --help").code == 0);
}
