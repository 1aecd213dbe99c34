#include "doctest.h"
#include "helpers.hpp"

#include "cts/baseline/baseline.hpp"
#include "cts/common/error.hpp"
#include "cts/eval/metrics.hpp"
#include "cts/eval/replay.hpp"

using namespace cts;
using namespace cts::baseline;
using sim::DialogMode;

namespace {

env::Embedding unit(int dim, int axis) {
  env::Embedding e = env::Embedding::Zero(dim);
  e(axis) = 1.0f;
  return e;
}

}  // namespace

TEST_CASE("navigation toward a node") {
  const auto tree = test::load_fixture("six_node.json");
  const auto at = [&](const char* id) { return tree.index_of(id); };
  CHECK(first_skip_toward(tree, at("start"), at("per_diem")) == 0u);
  CHECK(first_skip_toward(tree, at("topic"), at("per_diem")) == 0u);
  CHECK(first_skip_toward(tree, at("duration"), at("per_diem")) == 0u);
  CHECK(first_skip_toward(tree, at("topic"), at("hotel")) == 1u);
  CHECK_FALSE(first_skip_toward(tree, at("hotel"), at("topic")));
  CHECK_FALSE(first_skip_toward(tree, at("hotel"), at("hotel")));
}

TEST_CASE("retrieval ties go to the lowest index") {
  const auto tree = test::load_fixture("six_node.json");
  std::vector<env::Embedding> texts(tree.size(), unit(4, 0));
  const auto per_diem = tree.index_of("per_diem"), hotel = tree.index_of("hotel");
  CHECK(retrieve_free(tree, texts, unit(4, 0)) == tree.start());
  CHECK(retrieve_free(tree, texts, unit(4, 0), true) == std::min(per_diem, hotel));
  texts[hotel] = unit(4, 1);
  CHECK(retrieve_free(tree, texts, unit(4, 1)) == hotel);
}

TEST_CASE("retrieval matches exhaustive similarity search") {
  auto w = test::synth_world(30, 23);
  std::vector<env::Embedding> texts;
  for (const auto& n : w.tree->nodes()) texts.push_back(w.encoder->encode(n.text));
  for (std::size_t g = 0; g < w.tree->size(); ++g) {
    for (const auto& q : w.corpus->faq_texts(w.tree->node(g), graph::CorpusSplit::Train)) {
      const auto u = w.encoder->encode(q);
      std::size_t expect = 0;
      double best = -2.0;
      for (std::size_t i = 0; i < w.tree->size(); ++i) {
        if (w.tree->node(i).text.empty()) continue;
        const double s = text::cosine(u, texts[i]);
        if (s > best) best = s, expect = i;
      }
      CHECK(retrieve_free(*w.tree, texts, u) == expect);
    }
  }
  CHECK(retrieve_free(*w.tree, texts, texts[3]) == 3);
}

TEST_CASE("guided step ranks answer texts, ties in file order") {
  std::vector<env::ActionInput> c(3);
  c[0] = {0, env::Embedding::Zero(4), true};
  c[1] = {1, unit(4, 2), false};
  c[2] = {2, unit(4, 2), false};
  CHECK(step_guided(c, unit(4, 2)) == 1);
  c[2].text = unit(4, 3);
  CHECK(step_guided(c, unit(4, 3)) == 2);
  CHECK_THROWS_AS(step_guided({c[0]}, unit(4, 3)), NoAnswers);
}

TEST_CASE("mode classifier fits its training items") {
  auto w = test::synth_world(25, 21);
  const auto clf = ModeClassifier::train(w, {}, {.dialogs = 1000, .seed = 1});
  env::Environment environment(w, {});
  const auto start_text = w.encoder->encode(w.tree->node(w.tree->start()).text);
  int right[2] = {0, 0}, total[2] = {0, 0};
  for (int i = 0; i < 1000; ++i) {
    const auto step = environment.reset(derive_seed(1, static_cast<std::uint64_t>(i)));
    const int cls = step.obs.mode_label == DialogMode::Free;
    ++total[cls];
    right[cls] += clf.predict(step.obs.initial_utterance, start_text) == step.obs.mode_label;
  }
  CHECK(right[0] >= 0.9 * total[0]);
  CHECK(right[1] >= 0.9 * total[1]);

  const double p = clf.probability_free(env::Embedding::Zero(w.encoder->dim()), start_text);
  CHECK(p > 0.0);
  CHECK(p < 1.0);

  const auto back = ModeClassifier::from_checkpoint(nn::decode_checkpoint(nn::encode_checkpoint(clf.to_checkpoint())));
  CHECK(back.probability_free(start_text, start_text) ==
        doctest::Approx(clf.probability_free(start_text, start_text)).epsilon(1e-6));
  CHECK_THROWS_AS(ModeClassifier().probability_free(start_text, start_text), Untrained);
}

TEST_CASE("mode classifier generalizes to held-out utterances") {
  auto w = test::synth_world(25, 21);
  const auto clf = ModeClassifier::train(w, {}, {.dialogs = 1000, .seed = 1});
  env::EnvConfig test_cfg;
  test_cfg.sim.split = graph::CorpusSplit::Test;
  env::Environment environment(w, test_cfg);
  const auto start_text = w.encoder->encode(w.tree->node(w.tree->start()).text);
  int correct = 0;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    const auto step = environment.reset(derive_seed(99, static_cast<std::uint64_t>(i)));
    correct += clf.predict(step.obs.initial_utterance, start_text) == step.obs.mode_label;
  }
  CHECK(correct >= 0.8 * n);
}

TEST_CASE("baseline policy runs consistent dialogs") {
  auto w = test::synth_world(25, 22);
  BaselinePolicy policy(w.tree, w.encoder, ModeClassifier::train(w, {}, {.dialogs = 500}));
  eval::EvalOptions opts;
  opts.dialogs = 200;
  const auto result = eval::run_evaluation(policy, w, opts);
  for (const auto& t : result.transcripts) {
    REQUIRE(eval::replay_transcript(*w.tree, t).consistent);
    // One mode guess per dialog, repeated on every turn.
    for (const auto& turn : t.turns) CHECK(turn.mode_prediction == t.turns.front().mode_prediction);
    if (t.mode != DialogMode::Guided) continue;
    // At most one ASK per node visit.
    for (std::size_t k = 1; k < t.turns.size(); ++k)
      CHECK_FALSE((t.turns[k].action == graph::ActionKind::Ask && t.turns[k - 1].action == graph::ActionKind::Ask));
  }
  CHECK(result.metrics.mode_consistency == 1.0);
  CHECK(result.metrics.success_free > 0.1);
  CHECK(result.metrics.skip_free > result.metrics.skip_guided);
}

TEST_CASE("baseline on prototypical answers without noise") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto w = test::synth_world(25, 30 + seed);
    env::EnvConfig cfg;
    cfg.sim.split = graph::CorpusSplit::Prototype;
    BaselinePolicy policy(w.tree, w.encoder, ModeClassifier::train(w, cfg, {.dialogs = 500}));
    eval::EvalOptions opts;
    opts.dialogs = 200;
    opts.env = cfg;
    opts.seed = seed;
    const auto m = eval::run_evaluation(policy, w, opts).metrics;
    CHECK(m.success_guided >= 0.99);
  }
}

TEST_CASE("baseline success does not rise with noise") {
  const std::vector<double> levels{0.0, 0.1, 1.0, 2.0};
  std::vector<double> mean(levels.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto w = test::synth_world(25, 40 + seed);
    BaselinePolicy policy(w.tree, w.encoder, ModeClassifier::train(w, {}, {.dialogs = 500, .seed = seed}));
    eval::EvalOptions opts;
    opts.dialogs = 200;
    opts.seed = seed;
    const auto rows = eval::noise_sweep(policy, w, opts, levels);
    REQUIRE(rows.size() == levels.size());
    for (std::size_t i = 0; i < rows.size(); ++i) mean[i] += rows[i].metrics.success_combined / 5;
  }
  for (std::size_t i = 1; i < mean.size(); ++i) CHECK(mean[i] <= mean[i - 1] + 1e-9);
}
