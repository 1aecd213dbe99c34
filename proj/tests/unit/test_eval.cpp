#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include "cts/common/error.hpp"
#include "cts/eval/metrics.hpp"
#include "cts/eval/replay.hpp"
#include "cts/eval/report.hpp"

using namespace cts;
using namespace cts::eval;
using graph::ActionKind;
using sim::DialogMode;

namespace {

constexpr auto A = ActionKind::Ask;
constexpr auto S = ActionKind::Skip;
constexpr auto G = DialogMode::Guided;
constexpr auto F = DialogMode::Free;

}  // namespace

TEST_CASE("skip ratio counts adjacent skip pairs") {
  CHECK(skip_ratio({A}) == 0.0);
  CHECK(skip_ratio({S}) == 0.0);
  CHECK(skip_ratio({S, S, A}) == doctest::Approx(1.0 / 3));
  CHECK(skip_ratio({S, S, S, S}) == doctest::Approx(0.75));
  CHECK(skip_ratio({A, S, A, S}) == 0.0);
  CHECK_THROWS_AS(skip_ratio({}), EmptyPath);
}

TEST_CASE("mode consistency and macro F1") {
  CHECK(mode_consistency({{G, G, F, F}}) == 0.0);
  CHECK(mode_consistency({{G, G, G}, {F}}) == 1.0);
  CHECK(mode_consistency({{G, G, G, F}, {}}) == doctest::Approx(0.5));
  CHECK(mode_consistency({}) == 0.0);

  CHECK(macro_f1({G, F}, {G, F}) == 1.0);
  // Guided: tp 1, fp 1, fn 1 -> 0.5; Free: tp 1, fp 1, fn 1 -> 0.5.
  CHECK(macro_f1({G, G, F, F}, {G, F, G, F}) == doctest::Approx(0.5));
  // Free is never true nor predicted and contributes 0.
  CHECK(macro_f1({G, G}, {G, G}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(macro_f1({G}, {}), DimensionMismatch);
}

TEST_CASE("oracle solves every dialog") {
  auto w = test::synth_world(25, 11);
  OraclePolicy oracle;
  EvalOptions opts;
  opts.dialogs = 200;
  opts.seed = 4;
  const auto result = run_evaluation(oracle, w, opts);
  CHECK(result.metrics.n_dialogs == 200);
  CHECK(result.metrics.n_guided + result.metrics.n_free == 200);
  CHECK(result.metrics.success_guided == 1.0);
  CHECK(result.metrics.success_free == 1.0);
  CHECK(result.metrics.mode_f1 == 1.0);
  CHECK(result.metrics.mode_consistency == 1.0);
}

TEST_CASE("evaluation is deterministic") {
  auto w = test::synth_world(25, 12);
  EvalOptions opts;
  opts.dialogs = 50;
  opts.env.noise = 0.1;
  RandomPolicy a(3), b(3);
  CHECK(run_evaluation(a, w, opts).metrics == run_evaluation(b, w, opts).metrics);
}

TEST_CASE("replay checker reproduces 1000 random transcripts") {
  int checked = 0;
  for (std::uint64_t tree_seed = 0; tree_seed < 4; ++tree_seed) {
    auto w = test::synth_world(20 + 5 * static_cast<int>(tree_seed), 100 + tree_seed);
    RandomPolicy policy(tree_seed);
    EvalOptions opts;
    opts.dialogs = 250;
    opts.seed = tree_seed;
    const auto result = run_evaluation(policy, w, opts);
    for (std::size_t i = 0; i < result.transcripts.size(); ++i) {
      const auto& t = result.transcripts[i];
      const auto v = replay_transcript(*w.tree, t);
      INFO(v.problem);
      REQUIRE(v.consistent);
      REQUIRE(v.rewards.size() == t.turns.size());
      for (std::size_t k = 0; k < t.turns.size(); ++k) CHECK(v.rewards[k] == t.turns[k].reward);
      CHECK(v.reason == t.turns.back().done);
      CHECK(v.success == result.success[i]);
      ++checked;
    }
    CHECK(replay_metrics(*w.tree, result.transcripts) == compute_metrics(result.transcripts, result.success));
  }
  CHECK(checked == 1000);
}

TEST_CASE("replay checker rejects tampered transcripts") {
  auto w = test::synth_world(25, 13);
  OraclePolicy oracle;
  EvalOptions opts;
  opts.dialogs = 20;
  const auto result = run_evaluation(oracle, w, opts);
  for (const auto& t : result.transcripts) {
    REQUIRE(replay_transcript(*w.tree, t).consistent);
    auto reward = t;
    reward.turns.back().reward += 1.0;
    CHECK_FALSE(replay_transcript(*w.tree, reward).consistent);
    auto truncated = t;
    truncated.turns.pop_back();
    if (!truncated.turns.empty()) CHECK_FALSE(replay_transcript(*w.tree, truncated).consistent);
  }
}

TEST_CASE("transcripts survive a JSON-lines round trip through the checker") {
  auto w = test::synth_world(25, 14);
  RandomPolicy policy(9);
  EvalOptions opts;
  opts.dialogs = 30;
  const auto result = run_evaluation(policy, w, opts);
  for (const auto& t : result.transcripts) {
    const auto back = sim::transcript_from_jsonl(*w.tree, sim::transcript_to_jsonl(*w.tree, t));
    CHECK(replay_transcript(*w.tree, back).consistent);
  }
}

TEST_CASE("reports") {
  Metrics m;
  m.success_guided = 0.5;
  m.n_dialogs = 10;
  m.seed = 7;
  const std::vector<ReportRow> rows{{"oracle", m}, {"baseline", {}}};
  const auto csv = report_csv(rows);
  CHECK(csv.rfind("policy,success_guided,success_free,success_combined,skip_guided,skip_free,mode_f1,"
                  "mode_consistency,noise,n_dialogs,n_guided,n_free,seed\n",
                  0) == 0);
  CHECK(csv.find("\noracle,0.5,") != std::string::npos);
  const auto json = nlohmann::json::parse(report_json(rows));
  REQUIRE(json.size() == 2);
  CHECK(json[0]["success_guided"] == 0.5);
  CHECK(json[0]["seed"] == 7);
  CHECK(report_text(rows).find("baseline") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "cts_report_test";
  std::filesystem::remove_all(dir);
  write_reports(dir.string(), rows);
  for (const char* f : {"report.txt", "report.csv", "report.json"}) CHECK(std::filesystem::exists(dir / f));
  std::filesystem::remove_all(dir);
}
