#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

#include "cts/agent/agent.hpp"
#include "cts/agent/config.hpp"
#include "cts/agent/her.hpp"
#include "cts/agent/learning.hpp"
#include "cts/agent/trainer.hpp"
#include "cts/common/error.hpp"
#include "cts/eval/replay.hpp"
#include "cts/nn/gradcheck.hpp"
#include "cts/nn/loss.hpp"

using namespace cts;
using namespace cts::agent;

namespace {

NetProfile tiny_profile(double dropout = 0.0) {
  NetProfile p;
  p.trunk = {6, 5};
  p.value = {4};
  p.advantage = {5, 3};
  p.action = {4};
  p.mode = {3};
  p.dropout = dropout;
  return p;
}

template <typename S>
QBatch<S> random_batch(Rng& rng, std::size_t sd, std::size_t ad, const std::vector<int>& counts) {
  QBatch<S> b;
  b.states.resize(static_cast<Eigen::Index>(sd), static_cast<Eigen::Index>(counts.size()));
  int n = 0;
  b.offsets.push_back(0);
  for (int c : counts) b.offsets.push_back(n += c);
  b.actions.resize(static_cast<Eigen::Index>(ad), n);
  for (Eigen::Index k = 0; k < b.states.size(); ++k) b.states.data()[k] = static_cast<S>(rng.normal());
  for (Eigen::Index k = 0; k < b.actions.size(); ++k) b.actions.data()[k] = static_cast<S>(rng.normal());
  return b;
}

}  // namespace

TEST_CASE("single candidate gives Q = V") {
  Rng rng(1);
  CtsQNetwork<float> net(7, 5, tiny_profile(), 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = random_batch<float>(rng, 7, 5, {1, 1, 1});
    const auto out = net.forward(b);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(out.q(k) - out.value(k)) <= 1e-6);
  }
}

TEST_CASE("dueling aggregation") {
  // V = 2, A = [1, 3]: Q = 2 + A - 2.
  CtsQNetwork<double> net(2, 2, tiny_profile(), 4);
  auto& v_out = net.value_head().layers().back();
  v_out.weight.setZero();
  v_out.bias(0, 0) = 2.0;
  Rng rng(2);
  const auto b = random_batch<double>(rng, 2, 2, {2});
  auto out = net.forward(b);
  const double a0 = out.advantage(0), a1 = out.advantage(1), mean = (a0 + a1) / 2;
  CHECK(out.q(0) == doctest::Approx(2 + a0 - mean));
  CHECK(out.q(1) == doctest::Approx(2 + a1 - mean));
  CHECK(out.value(0) == doctest::Approx(2.0));
  // Fix the advantages at 1 and 3: Q = [1, 3].
  auto& a_out = net.advantage_head().layers().back();
  a_out.weight.setZero();
  a_out.bias(0, 0) = 1.0;
  const auto flat = net.forward(b);
  CHECK(flat.q(0) == doctest::Approx(2.0));
  CHECK(flat.q(1) == doctest::Approx(2.0));
}

TEST_CASE("batched candidates match one forward per candidate") {
  Rng rng(3);
  CtsQNetwork<float> net(9, 6, tiny_profile(0.25), 5);
  const auto b = random_batch<float>(rng, 9, 6, {3, 1, 4});
  const auto out = net.forward(b);
  for (Eigen::Index s = 0; s < 3; ++s) {
    QBatch<float> one;
    one.states = b.states.col(s);
    one.actions = b.actions.middleCols(b.offsets[s], b.count(s));
    one.offsets = {0, b.count(s)};
    const auto single = net.forward(one);
    for (Eigen::Index i = 0; i < b.count(s); ++i) {
      // Advantage of each candidate evaluated on its own.
      QBatch<float> alone;
      alone.states = b.states.col(s);
      alone.actions = b.actions.col(b.offsets[s] + i);
      alone.offsets = {0, 1};
      CHECK(std::abs(net.forward(alone).advantage(0) - out.advantage(b.offsets[s] + i)) <= 1e-6);
      CHECK(std::abs(single.q(i) - out.q(b.offsets[s] + i)) <= 1e-6);
    }
    CHECK(std::abs(single.value(0) - out.value(s)) <= 1e-6);
  }
}

TEST_CASE("value and mode ignore the candidate set; permutation permutes Q") {
  Rng rng(4);
  CtsQNetwork<float> net(8, 5, tiny_profile(), 6);
  auto b = random_batch<float>(rng, 8, 5, {4});
  const auto full = net.forward(b);
  QBatch<float> fewer = b;
  fewer.actions = b.actions.leftCols(2);
  fewer.offsets = {0, 2};
  const auto part = net.forward(fewer);
  CHECK(part.value(0) == full.value(0));
  CHECK(part.mode_logit(0) == full.mode_logit(0));
  QBatch<float> perm = b;
  const int order[4] = {2, 0, 3, 1};
  for (int i = 0; i < 4; ++i) perm.actions.col(i) = b.actions.col(order[i]);
  const auto p = net.forward(perm);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(p.q(i) - full.q(order[i])) <= 1e-6);
}

TEST_CASE("full network gradient check") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    CtsQNetwork<double> net(5, 4, tiny_profile(0.25), seed);
    // Non-zero biases keep dropped-out inputs off the SELU kink at 0.
    for (auto& p : net.params())
      if (p.value->cols() == 1)
        for (Eigen::Index k = 0; k < p.value->size(); ++k) p.value->data()[k] = rng.normal(0.0, 0.5);
    const auto b = random_batch<double>(rng, 5, 4, {2, 3, 1});
    Vec<double> wq(6), wm(3);
    for (int i = 0; i < 6; ++i) wq(i) = rng.normal();
    for (int i = 0; i < 3; ++i) wm(i) = rng.normal();
    const std::uint64_t dropout_seed = 77 + seed;
    auto loss = [&] {
      Rng r(dropout_seed);
      const auto out = net.forward(b, true, &r);
      double l = 0.0;
      for (int i = 0; i < 6; ++i) l += wq(i) * out.q(i) * out.q(i);
      for (int i = 0; i < 3; ++i) l += wm(i) * out.mode_logit(i);
      return l;
    };
    net.zero_grad();
    Rng r(dropout_seed);
    CtsQNetwork<double>::Cache cache;
    const auto out = net.forward(b, true, &r, &cache);
    Vec<double> dq = 2.0 * wq.cwiseProduct(out.q);
    net.backward(cache, dq, wm);
    // Centering makes Q blind to the advantage output bias.
    auto params = net.params();
    const auto& a_bias = net.advantage_head().layers().back().grad_bias;
    CHECK(std::abs(a_bias(0, 0)) < 1e-12);
    std::erase_if(params, [&](const nn::Param<double>& p) { return p.grad == &a_bias; });
    // The floor keeps round-off on near-zero gradients out of the ratio.
    const auto res = nn::gradient_check(params, loss, 1e-5, 1e-4);
    worst = std::max(worst, res.max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("target copy is byte-exact") {
  CtsQNetwork<float> a(6, 4, tiny_profile(), 1), b(6, 4, tiny_profile(), 2);
  CHECK_FALSE(a.same_parameters(b));
  b.copy_from(a);
  CHECK(a.same_parameters(b));
}

TEST_CASE("action selection") {
  Rng rng(5);
  const std::vector<double> q{0.1, 0.7, 0.3, 0.7, -1};
  CHECK(select_action(q, 0.0, rng, true) == 1);
  CHECK(select_action(q, 1.0, rng, false) == 1);
  CHECK(select_action(std::vector<double>{1, 1}, 0.0, rng, true) == 0);
  int counts[5] = {};
  for (int i = 0; i < 10000; ++i) ++counts[select_action(q, 1.0, rng, true)];
  for (int c : counts) {
    CHECK(c >= 1800);
    CHECK(c <= 2200);
  }
  CHECK(epsilon_at(0, 1000, 0.6, 0.0, 0.99) == 0.6);
  CHECK(epsilon_at(495, 1000, 0.6, 0.0, 0.99) == doctest::Approx(0.3));
  CHECK(epsilon_at(990, 1000, 0.6, 0.0, 0.99) == 0.0);
  CHECK(epsilon_at(2000, 1000, 0.6, 0.0, 0.99) == 0.0);
}

TEST_CASE("munchausen target") {
  MunchausenParams p;
  SUBCASE("hard-max limit") {
    p.alpha = 0.0;
    p.tau = 1e-6;
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
      const std::vector<double> qs{rng.normal(), rng.normal()}, qn{rng.normal(), rng.normal()};
      const double r = rng.normal();
      const double soft = munchausen_target(qs, 0, r, false, qn, {}, p);
      CHECK(std::abs(soft - (r + p.gamma * std::max(qn[0], qn[1]))) < 1e-3);
      // Online argmax with online == target values is the same target.
      auto q2 = p;
      q2.double_q = DoubleQ::OnlineArgmax;
      CHECK(std::abs(munchausen_target(qs, 0, r, false, qn, qn, q2) - soft) < 1e-9);
    }
  }
  SUBCASE("double DQN limit with a distinct online network") {
    p.alpha = 0.0;
    p.tau = 1e-6;
    p.double_q = DoubleQ::OnlineArgmax;
    const std::vector<double> qs{0, 0}, qn{1.0, 2.0}, online{5.0, -1.0};
    CHECK(std::abs(munchausen_target(qs, 1, 0.5, false, qn, online, p) - (0.5 + p.gamma * 1.0)) < 1e-3);
  }
  SUBCASE("terminal with equal logits") {
    const std::vector<double> zero{0.0, 0.0};
    CHECK(munchausen_target(zero, 1, 0.25, true, zero, {}, p) ==
          doctest::Approx(0.25 + p.alpha * p.tau * std::log(0.5)));
  }
  SUBCASE("log-policy clip") {
    const std::vector<double> qs{10.0, -10.0};
    const double y = munchausen_target(qs, 1, 0.0, true, qs, {}, p);
    CHECK(y == doctest::Approx(-0.027).epsilon(1e-12));
  }
  SUBCASE("target values are clipped") {
    p.alpha = 0.0;
    p.tau = 1e-6;
    const std::vector<double> qs{0, 0}, qn{100.0, -100.0};
    CHECK(munchausen_target(qs, 0, 0.0, false, qn, {}, p) == doctest::Approx(p.gamma * 10.0));
  }
}

TEST_CASE("prioritized replay") {
  Rng rng(7);
  SUBCASE("equal priorities") {
    ReplayBuffer buf(8, 0.6);
    for (int i = 0; i < 4; ++i) buf.push({});
    const auto s = buf.sample(4, 0.4, rng);
    for (double w : s.weights) CHECK(w == 1.0);
    int counts[4] = {};
    for (int i = 0; i < 100000; ++i) ++counts[buf.sample(1, 0.4, rng).slots[0]];
    for (int c : counts) CHECK(std::abs(c - 25000) < 0.05 * 25000);
  }
  SUBCASE("td errors set priorities") {
    const double alpha = 0.6;
    ReplayBuffer buf(4, alpha);
    buf.push({});
    buf.push({});
    buf.update({0, 1}, {0.3, -std::pow(2.0, 1.0 / alpha)});
    CHECK(buf.priority(0) == doctest::Approx(1.0));
    CHECK(buf.priority(1) == doctest::Approx(2.0));
    int counts[2] = {};
    for (int i = 0; i < 100000; ++i) ++counts[buf.sample(1, 0.4, rng).slots[0]];
    CHECK(static_cast<double>(counts[1]) / counts[0] == doctest::Approx(2.0).epsilon(0.05));
    for (int i = 0; i < 50; ++i) {
      const auto s = buf.sample(2, 0.0, rng);
      for (double w : s.weights) CHECK(w == 1.0);
      // Weights (N P)^-beta normalized by the largest.
      const auto t = buf.sample(2, 1.0, rng);
      if (t.slots[0] != t.slots[1])
        for (std::size_t k = 0; k < 2; ++k) CHECK(t.weights[k] == doctest::Approx(t.slots[k] == 1 ? 0.5 : 1.0));
    }
  }
  SUBCASE("capacity is a FIFO ring") {
    ReplayBuffer buf(3, 0.6);
    for (int i = 0; i < 5; ++i) {
      Transition t;
      t.action = static_cast<std::size_t>(i);
      buf.push(t);
    }
    CHECK(buf.size() == 3);
    CHECK(buf.at(0).action == 3);
    CHECK(buf.at(1).action == 4);
    CHECK(buf.at(2).action == 2);
    CHECK_THROWS_AS(buf.sample(4, 0.4, rng), BufferTooSmall);
  }
}

namespace {

/// Runs one dialog with `policy` and records it as an episode.
Episode record_episode(env::Environment& e, std::uint64_t seed, eval::Policy& policy,
                       std::optional<sim::DialogMode> mode = sim::DialogMode::Free) {
  Episode ep;
  auto step = e.reset(seed, mode);
  policy.begin_dialog(&e.session());
  ep.observations.push_back(step.obs);
  ep.initial_tagged = *e.history().initial_tagged();
  while (!step.done) {
    const auto a = policy.act(step.obs, step.candidates);
    step = e.step(a);
    ep.actions.push_back(a);
    ep.observations.push_back(step.obs);
    ep.beliefs.push_back(e.session().state().beliefstate);
  }
  ep.transcript = e.session().transcript();
  return ep;
}

}  // namespace

TEST_CASE("hindsight relabeling") {
  auto w = test::synth_world(25, 31);
  env::EnvConfig cfg;
  cfg.noise = 0.1;
  env::Environment e(w, cfg);
  Rng rng(8);
  auto encode = [&](const std::string& t) { return e.encode_user(t); };

  SUBCASE("100 relabeled episodes pass replay") {
    int relabeled = 0, synthetic = 0;
    eval::RandomPolicy policy(3);
    for (std::uint64_t seed = 0; relabeled < 100 && seed < 2000; ++seed) {
      const auto ep = record_episode(e, seed, policy);
      if (e.session().success()) continue;
      const auto r = her_relabel(ep, *w.tree, *w.corpus, cfg.sim, encode, rng);
      if (!r) continue;
      ++relabeled;
      const auto& turns = r->transcript.turns;
      synthetic += turns.size() >= 2 && turns[turns.size() - 2].action == graph::ActionKind::Skip &&
                   turns[turns.size() - 2].landed == r->transcript.goal;
      const auto v = eval::replay_transcript(*w.tree, r->transcript, cfg.sim.reward, cfg.sim.stop);
      INFO(v.problem);
      CHECK(v.consistent);
      CHECK(v.success);
      CHECK(v.reason == sim::DoneReason::GoalPresented);
      REQUIRE(r->rewards.size() == r->transcript.turns.size());
      REQUIRE(r->actions.size() == r->rewards.size());
      REQUIRE(r->observations.size() == r->actions.size() + 1);
      for (std::size_t k = 0; k < r->rewards.size(); ++k) CHECK(r->rewards[k] == v.rewards[k]);
      CHECK(r->rewards.back() == cfg.sim.reward.free_goal(*w.tree));
      // Every observation carries the new opening utterance.
      const auto& init = r->observations.front().initial_utterance;
      for (const auto& o : r->observations) CHECK(o.initial_utterance == init);
      CHECK(r->observations.front().current_utterance == init);
    }
    CHECK(relabeled == 100);
    CHECK(synthetic > 0);
  }

  SUBCASE("an episode ending on an FAQ node keeps that goal") {
    // Free oracle episode, then relabel as if it had failed.
    eval::OraclePolicy oracle;
    const auto ep = record_episode(e, 5, oracle);
    const auto r = her_relabel(ep, *w.tree, *w.corpus, cfg.sim, encode, rng);
    REQUIRE(r);
    CHECK(r->transcript.goal == ep.transcript.goal);
    CHECK(r->actions.size() == ep.actions.size());
    CHECK(r->rewards.back() == cfg.sim.reward.free_goal(*w.tree));
    CHECK(r->rewards.back() / e.normalizer() == doctest::Approx(1.0));
  }

  SUBCASE("no FAQ node visited") {
    auto corpus = std::make_shared<graph::UtteranceCorpus>(*w.corpus);
    eval::RandomPolicy policy(4);
    const auto ep = record_episode(e, 7, policy);
    for (const auto& n : w.tree->nodes()) corpus->faq[n.id] = {};
    CHECK_FALSE(her_relabel(ep, *w.tree, *corpus, cfg.sim, encode, rng));
  }

  SUBCASE("guided episodes are left alone") {
    eval::RandomPolicy policy(5);
    const auto ep = record_episode(e, 9, policy, sim::DialogMode::Guided);
    CHECK_FALSE(her_relabel(ep, *w.tree, *w.corpus, cfg.sim, encode, rng));
  }
}

TEST_CASE("config round trip and validation") {
  TrainerConfig c;
  CHECK(c.munchausen.gamma == 0.99);
  CHECK(c.munchausen.tau == 0.03);
  CHECK(c.per_alpha == 0.6);
  CHECK(c.buffer == 100000);
  CHECK(c.eval_freq == 10000);
  CHECK(c.env.noise == 0.1);
  c.max_turns = 1234;
  c.net.trunk = {32, 16};
  c.env.mask = env::ObsMask::without({"history", "node_text"});
  c.munchausen.double_q = DoubleQ::OnlineArgmax;
  c.seed = 99;
  const auto back = parse_config(serialize_config(c));
  CHECK(serialize_config(back) == serialize_config(c));
  CHECK(config_fingerprint(back) == config_fingerprint(c));
  CHECK(back.net.trunk == std::vector<std::size_t>{32, 16});
  CHECK(back.env.mask == c.env.mask);

  const auto paper = parse_config("[net]\nprofile = paper\n");
  CHECK(paper.net.trunk == std::vector<std::size_t>{8096, 4096, 4096});
  CHECK(parse_config("[net]\nprofile = paper\ntrunk = 64\n").net.trunk == std::vector<std::size_t>{64});
  CHECK_THROWS_AS(parse_config("[trainer]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[trainer]\nbatch = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[trainer]\nepsilon_start = 0.1\nepsilon_end = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[obs]\ndisable = colour\n"), ConfigError);
}

namespace {

TrainerConfig small_run(long turns) {
  TrainerConfig c;
  c.max_turns = turns;
  c.eval_freq = 1000;
  c.eval_dialogs = 20;
  c.train_start = 200;
  c.batch = 16;
  c.buffer = 5000;
  c.embedding_dim = 32;
  c.net = tiny_profile(0.25);
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("train step mechanics") {
  auto w = test::synth_world(15, 32, 32);
  SUBCASE("reduces to Huber on the reward") {
    auto c = small_run(10);
    c.munchausen.gamma = 0.0;
    c.munchausen.alpha = 0.0;
    c.per_beta = 0.0;
    c.lambda_intent = 0.0;
    c.net.dropout = 0.0;
    Trainer tr(w, c);
    eval::RandomPolicy policy(1);
    for (std::uint64_t s = 0; tr.buffer().size() < 64; ++s) {
      auto ep = record_episode(tr.environment(), s, policy, std::nullopt);
      tr.store_episode(ep, true);
    }
    // Recompute the expected loss before the step.
    Rng probe = Rng(derive_seed(c.seed, 2));
    const auto sample = tr.buffer().sample(16, 0.0, probe);
    std::vector<const StoredState*> states;
    for (auto slot : sample.slots) states.push_back(tr.buffer().at(slot).state.get());
    CandidateTable table(tr.environment().builder());
    const auto out = tr.online().forward(make_batch(states, table));
    const auto batch = make_batch(states, table);
    double expect = 0.0;
    for (std::size_t k = 0; k < states.size(); ++k) {
      const auto& t = tr.buffer().at(sample.slots[k]);
      expect += nn::huber(out.q(batch.offsets[static_cast<Eigen::Index>(k)] + static_cast<Eigen::Index>(t.action)),
                          t.reward) / 16.0;
    }
    const auto losses = tr.train_step();
    CHECK(losses.q_loss == doctest::Approx(expect).epsilon(1e-5));
  }
  SUBCASE("lambda 0 leaves the mode head untouched") {
    auto c = small_run(10);
    c.lambda_intent = 0.0;
    Trainer tr(w, c);
    eval::RandomPolicy policy(2);
    for (std::uint64_t s = 0; tr.buffer().size() < 64; ++s)
      tr.store_episode(record_episode(tr.environment(), s, policy, std::nullopt), true);
    tr.train_step();
    for (const auto& l : tr.online().mode_head().layers()) {
      CHECK(l.grad_weight.norm() == 0.0f);
      CHECK(l.grad_bias.norm() == 0.0f);
    }
  }
  SUBCASE("target network copies every 15 steps") {
    auto c = small_run(10);
    Trainer tr(w, c);
    eval::RandomPolicy policy(3);
    for (std::uint64_t s = 0; tr.buffer().size() < 64; ++s)
      tr.store_episode(record_episode(tr.environment(), s, policy, std::nullopt), true);
    for (int step = 1; step <= 45; ++step) {
      tr.train_step();
      if (step % 15 == 0) CHECK(tr.target().same_parameters(tr.online()));
      if (step % 15 == 1) CHECK_FALSE(tr.target().same_parameters(tr.online()));
    }
  }
}

TEST_CASE("training run produces a checkpoint and one log row per evaluation") {
  auto w = test::synth_world(15, 33, 32);
  const auto c = small_run(2500);
  std::ostringstream log_a, log_b;
  Trainer a(w, c);
  const auto ra = a.run(&log_a);
  CHECK(ra.log.size() == 3);  // turns 1000, 2000 and the final 2500
  CHECK(ra.train_steps > 0);
  CHECK(!ra.best.tensors.empty());
  const auto model = agent_from_checkpoint(nn::decode_checkpoint(nn::encode_checkpoint(ra.best)));
  CHECK(config_fingerprint(model.config) == config_fingerprint(c));
  Trainer b(w, c);
  b.run(&log_b);
  CHECK(log_a.str() == log_b.str());
  const std::string text = log_a.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
