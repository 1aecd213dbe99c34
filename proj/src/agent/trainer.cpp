#include "cts/agent/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cts/eval/metrics.hpp"
#include "cts/nn/loss.hpp"
#include "json.hpp"

namespace cts::agent {

namespace {

constexpr std::uint64_t kActStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr std::uint64_t kHerStream = 4;
constexpr std::uint64_t kInitStream = 5;
constexpr std::uint64_t kEvalStream = 6;
constexpr std::uint64_t kEpisodeStream = 1 << 20;

bool better(const eval::Metrics& a, const eval::Metrics& b) {
  if (a.success_combined != b.success_combined) return a.success_combined > b.success_combined;
  return a.skip_free > b.skip_free;
}

}  // namespace

std::string log_row_json(const TrainLogRow& r) {
  nlohmann::ordered_json j;
  j["turn"] = r.turn;
  j["success_guided"] = r.metrics.success_guided;
  j["success_free"] = r.metrics.success_free;
  j["success_combined"] = r.metrics.success_combined;
  j["skip_guided"] = r.metrics.skip_guided;
  j["skip_free"] = r.metrics.skip_free;
  j["mode_f1"] = r.metrics.mode_f1;
  j["mode_consistency"] = r.metrics.mode_consistency;
  j["epsilon"] = r.epsilon;
  j["q_loss"] = r.losses.q_loss;
  j["intent_loss"] = r.losses.intent_loss;
  return j.dump();
}

CandidateTable::CandidateTable(const env::ObservationBuilder& builder) {
  const auto& layout = builder.layout();
  const auto ad = static_cast<Eigen::Index>(layout.action_dim());
  for (std::size_t n = 0; n < builder.tree().size(); ++n) {
    const auto cands = builder.candidates(n);
    Mat<float> m(ad, static_cast<Eigen::Index>(cands.size()));
    for (std::size_t i = 0; i < cands.size(); ++i)
      env::flatten_action(cands[i], layout, m.col(static_cast<Eigen::Index>(i)).data());
    table_.push_back(std::move(m));
  }
}

QBatch<float> make_batch(const std::vector<const StoredState*>& states, const CandidateTable& candidates) {
  QBatch<float> b;
  if (states.empty()) throw InvalidParams("empty batch");
  const auto sd = static_cast<Eigen::Index>(states.front()->features.size());
  b.states.resize(sd, static_cast<Eigen::Index>(states.size()));
  b.offsets.push_back(0);
  for (std::size_t k = 0; k < states.size(); ++k) {
    b.states.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Vec<float>>(states[k]->features.data(), sd);
    b.offsets.push_back(b.offsets.back() + candidates.at(states[k]->node).cols());
  }
  b.actions.resize(candidates.at(states.front()->node).rows(), b.offsets.back());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto& m = candidates.at(states[k]->node);
    b.actions.middleCols(b.offsets[k], m.cols()) = m;
  }
  return b;
}

Trainer::Trainer(env::World world, TrainerConfig config)
    : world_(std::move(world)),
      config_(std::move(config)),
      env_(world_, config_.env),
      candidates_(env_.builder()),
      adam_(nn::AdamConfig{config_.lr, 0.9, 0.999, 1e-8, config_.max_grad_norm}),
      buffer_(config_.buffer, config_.per_alpha),
      act_rng_(derive_seed(config_.seed, kActStream)),
      sample_rng_(derive_seed(config_.seed, kSampleStream)),
      dropout_rng_(derive_seed(config_.seed, kDropoutStream)),
      her_rng_(derive_seed(config_.seed, kHerStream)) {
  const auto& layout = env_.layout();
  online_ = std::make_shared<QNet>(layout.state_dim(), layout.action_dim(), config_.net,
                                   derive_seed(config_.seed, kInitStream));
  target_ = std::make_shared<QNet>(*online_);
}

std::shared_ptr<StoredState> Trainer::store(const env::Observation& obs) const {
  auto s = std::make_shared<StoredState>();
  s->features = env::flatten_state(obs, env_.layout());
  s->node = obs.node;
  s->mode = obs.mode_label;
  return s;
}

void Trainer::store_episode(const Episode& ep, bool success) {
  const double norm = env_.normalizer();
  auto push_all = [&](const std::vector<env::Observation>& obs, const std::vector<std::size_t>& actions,
                      const std::vector<double>& raw) {
    std::shared_ptr<const StoredState> prev = store(obs.front());
    for (std::size_t t = 0; t < actions.size(); ++t) {
      std::shared_ptr<const StoredState> next = store(obs[t + 1]);
      Transition tr;
      tr.state = prev;
      tr.next = next;
      tr.action = actions[t];
      tr.reward = static_cast<float>(std::clamp(raw[t] / norm, -1.0, 1.0));
      tr.done = t + 1 == actions.size();
      buffer_.push(std::move(tr));
      prev = std::move(next);
    }
  };
  std::vector<double> raw;
  for (const auto& turn : ep.transcript.turns) raw.push_back(turn.reward);
  push_all(ep.observations, ep.actions, raw);
  if (!config_.her || success || ep.transcript.mode != sim::DialogMode::Free) return;
  const auto relabeled = her_relabel(ep, *world_.tree, *world_.corpus, config_.env.sim,
                                     [this](const std::string& t) { return env_.encode_user(t); }, her_rng_);
  if (!relabeled) return;
  ++relabeled_;
  push_all(relabeled->observations, relabeled->actions, relabeled->rewards);
}

TrainLosses Trainer::train_step() {
  const auto B = static_cast<std::size_t>(config_.batch);
  const auto sample = buffer_.sample(B, config_.per_beta, sample_rng_);
  std::vector<const StoredState*> states, both;
  for (auto slot : sample.slots) states.push_back(buffer_.at(slot).state.get());
  both = states;
  for (auto slot : sample.slots) both.push_back(buffer_.at(slot).next.get());

  const auto online_batch = make_batch(states, candidates_);
  QNet::Cache cache;
  const auto online = online_->forward(online_batch, true, &dropout_rng_, &cache);
  const auto target_batch = make_batch(both, candidates_);
  const auto target = target_->forward(target_batch);
  const bool online_argmax = config_.munchausen.double_q == DoubleQ::OnlineArgmax;
  QBatch<float> next_batch;
  QOutput<float> online_next;
  if (online_argmax) {
    next_batch = make_batch({both.begin() + static_cast<std::ptrdiff_t>(B), both.end()}, candidates_);
    online_next = online_->forward(next_batch);
  }

  Vec<float> dq = Vec<float>::Zero(online.q.size());
  Vec<float> dmode = Vec<float>::Zero(static_cast<Eigen::Index>(B));
  std::vector<double> td(B);
  TrainLosses losses;
  auto span_of = [](const Vec<float>& v, Eigen::Index lo, Eigen::Index n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = v(lo + i);
    return out;
  };
  for (std::size_t k = 0; k < B; ++k) {
    const auto& tr = buffer_.at(sample.slots[k]);
    const auto bk = static_cast<Eigen::Index>(k), bn = static_cast<Eigen::Index>(k + B);
    const auto qs = span_of(target.q, target_batch.offsets[bk], target_batch.count(bk));
    const auto qn = span_of(target.q, target_batch.offsets[bn], target_batch.count(bn));
    std::vector<double> qo;
    if (online_argmax) qo = span_of(online_next.q, next_batch.offsets[bk], next_batch.count(bk));
    const double y = munchausen_target(qs, tr.action, tr.reward, tr.done, qn, qo, config_.munchausen);
    const auto idx = online_batch.offsets[bk] + static_cast<Eigen::Index>(tr.action);
    const double pred = online.q(idx);
    td[k] = pred - y;
    const double w = sample.weights[k];
    losses.q_loss += w * nn::huber(pred, y) / static_cast<double>(B);
    dq(idx) = static_cast<float>(w * nn::huber_grad(pred, y) / static_cast<double>(B));
    const double label = tr.state->mode == sim::DialogMode::Free ? 1.0 : 0.0;
    const double logit = online.mode_logit(bk);
    losses.intent_loss += nn::bce_with_logits(logit, label) / static_cast<double>(B);
    dmode(bk) = static_cast<float>(config_.lambda_intent * nn::bce_with_logits_grad(logit, label) /
                                   static_cast<double>(B));
  }
  online_->zero_grad();
  online_->backward(cache, dq, dmode);
  adam_.step(online_->params());
  buffer_.update(sample.slots, td);
  if (++train_steps_ % config_.target_update == 0) target_->copy_from(*online_);
  return losses;
}

eval::Metrics Trainer::evaluate() {
  AgentPolicy policy(*online_, env_.layout());
  eval::EvalOptions opts;
  opts.dialogs = config_.eval_dialogs;
  opts.seed = derive_seed(config_.seed, kEvalStream);
  opts.env = config_.env;
  return eval::run_evaluation(policy, world_, opts).metrics;
}

TrainResult Trainer::run(std::ostream* log, const std::function<void(const TrainLogRow&)>& progress) {
  TrainResult result;
  std::optional<eval::Metrics> best;
  std::uint64_t episode_index = 0;
  bool active = false;
  env::StepResult step;
  Episode episode;
  TrainLosses window;
  long window_steps = 0;

  auto begin_episode = [&] {
    step = env_.reset(derive_seed(config_.seed, kEpisodeStream + episode_index++));
    episode = Episode{};
    episode.observations.push_back(step.obs);
    episode.initial_tagged = *env_.history().initial_tagged();
    active = true;
  };
  auto record = [&](long turn) {
    TrainLogRow row;
    row.turn = turn;
    row.metrics = evaluate();
    row.epsilon = epsilon_at(turn, config_.max_turns, config_.epsilon_start, config_.epsilon_end,
                             config_.exploration_fraction);
    if (window_steps > 0) {
      row.losses.q_loss = window.q_loss / static_cast<double>(window_steps);
      row.losses.intent_loss = window.intent_loss / static_cast<double>(window_steps);
    }
    window = {};
    window_steps = 0;
    if (!best || better(row.metrics, *best)) {
      best = row.metrics;
      nlohmann::ordered_json extra;
      extra["turn"] = turn;
      extra["success_combined"] = row.metrics.success_combined;
      extra["skip_free"] = row.metrics.skip_free;
      result.best = agent_checkpoint(*online_, config_, extra.dump());
      result.best_metrics = row.metrics;
      result.best_turn = turn;
    }
    if (log) *log << log_row_json(row) << '\n' << std::flush;
    result.log.push_back(row);
    if (progress) progress(row);
  };

  for (long turn = 0; turn < config_.max_turns;) {
    if (!active) begin_episode();
    const double eps = epsilon_at(turn, config_.max_turns, config_.epsilon_start, config_.epsilon_end,
                                  config_.exploration_fraction);
    std::size_t action;
    if (act_rng_.uniform() < eps) {
      action = act_rng_.index(step.candidates.size());
    } else {
      const auto q = q_values(*online_, env_.layout(), step.obs, step.candidates);
      action = select_action(q, 0.0, act_rng_, false);
    }
    step = env_.step(action);
    episode.actions.push_back(action);
    episode.observations.push_back(step.obs);
    episode.beliefs.push_back(env_.session().state().beliefstate);
    if (step.done) {
      episode.transcript = env_.session().transcript();
      store_episode(episode, env_.session().success());
      active = false;
    }
    ++turn;
    if (turn >= config_.train_start && turn % config_.train_freq == 0 &&
        buffer_.size() >= static_cast<std::size_t>(config_.batch)) {
      const auto l = train_step();
      window.q_loss += l.q_loss;
      window.intent_loss += l.intent_loss;
      ++window_steps;
    }
    if (turn % config_.eval_freq == 0 || turn == config_.max_turns) record(turn);
  }
  result.train_steps = train_steps_;
  return result;
}

}  // namespace cts::agent
