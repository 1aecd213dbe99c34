#include "cts/baseline/baseline.hpp"

#include <cmath>
#include <deque>
#include <numeric>

#include "cts/common/error.hpp"

namespace cts::baseline {

using graph::NodeKind;
using sim::DialogMode;

namespace {

Eigen::VectorXd features(const env::Embedding& initial, const env::Embedding& start_text) {
  Eigen::VectorXd x(initial.size() + start_text.size());
  x << initial.cast<double>(), start_text.cast<double>();
  return x;
}

}  // namespace

ModeClassifier ModeClassifier::train(const env::World& world, const env::EnvConfig& env_config,
                                     const ClassifierConfig& config) {
  env::Environment environment(world, env_config);
  const auto start_text = world.encoder->encode(world.tree->node(world.tree->start()).text);
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ys;
  for (int i = 0; i < config.dialogs; ++i) {
    const auto step = environment.reset(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
    xs.push_back(features(step.obs.initial_utterance, start_text));
    ys.push_back(step.obs.mode_label == DialogMode::Free ? 1.0 : 0.0);
  }
  if (xs.empty()) throw Untrained("mode classifier needs at least one dialog");
  const auto d = xs.front().size();
  // Parameters [w; b] with Adam moments.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1), m = theta, v = theta;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Rng rng(derive_seed(config.seed, 0x6d6f6465));
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  long t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(d + 1);
      for (auto k = start; k < end; ++k) {
        const auto& x = xs[order[k]];
        const double z = theta.head(d).dot(x) + theta(d);
        const double err = 1.0 / (1.0 + std::exp(-z)) - ys[order[k]];
        grad.head(d) += err * x;
        grad(d) += err;
      }
      grad /= static_cast<double>(end - start);
      ++t;
      m = b1 * m + (1 - b1) * grad;
      v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
      theta.array() -= config.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
  }
  return ModeClassifier(theta.head(d), theta(d));
}

double ModeClassifier::probability_free(const env::Embedding& initial, const env::Embedding& start_text) const {
  if (!trained()) throw Untrained("mode classifier has not been trained");
  const auto x = features(initial, start_text);
  if (x.size() != w_.size()) throw DimensionMismatch("mode classifier input has the wrong dimension");
  return 1.0 / (1.0 + std::exp(-(w_.dot(x) + b_)));
}

nn::Checkpoint ModeClassifier::to_checkpoint() const {
  nn::Checkpoint c;
  c.meta = R"({"kind":"mode-classifier"})";
  c.tensors.push_back(w_.cast<float>().transpose());
  c.tensors.push_back(Eigen::MatrixXf::Constant(1, 1, static_cast<float>(b_)));
  return c;
}

ModeClassifier ModeClassifier::from_checkpoint(const nn::Checkpoint& c) {
  if (c.meta.find("mode-classifier") == std::string::npos || c.tensors.size() != 2 || c.tensors[0].rows() != 1 ||
      c.tensors[1].size() != 1)
    throw CheckpointError("checkpoint does not hold a mode classifier");
  return ModeClassifier(c.tensors[0].row(0).transpose().cast<double>(), c.tensors[1](0, 0));
}

std::size_t retrieve_free(const graph::DialogTree& tree, const std::vector<env::Embedding>& node_texts,
                          const env::Embedding& utterance, bool information_only) {
  std::optional<std::size_t> best;
  double best_score = -2.0;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    if (n.text.empty() || (information_only && n.kind != NodeKind::Information)) continue;
    const double s = text::cosine(utterance, node_texts[i]);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  if (!best) throw NoEligibleGoal("tree has no Information node to retrieve");
  return *best;
}

std::size_t step_guided(const std::vector<env::ActionInput>& candidates, const env::Embedding& utterance) {
  std::optional<std::size_t> best;
  double best_score = -2.0;
  for (const auto& c : candidates) {
    if (c.is_ask) continue;
    const double s = text::cosine(utterance, c.text);
    if (s > best_score) {
      best_score = s;
      best = c.index;
    }
  }
  if (!best) throw NoAnswers("no answer edge to follow");
  return *best;
}

std::optional<std::size_t> first_skip_toward(const graph::DialogTree& tree, std::size_t node,
                                             std::size_t target) {
  if (node == target) return std::nullopt;
  // BFS over nodes; first_edge[n] is the edge of `node` that starts the path.
  std::vector<long> first_edge(tree.size(), -1);
  std::vector<bool> seen(tree.size(), false);
  std::deque<std::size_t> queue;
  seen[node] = true;
  auto expand = [&](std::size_t from, long edge_of_origin, auto&& self) -> void {
    for (std::size_t e = 0; e < tree.node(from).answers.size(); ++e) {
      const auto to = tree.node(from).answers[e].target_index;
      if (seen[to]) continue;
      seen[to] = true;
      const long origin = edge_of_origin < 0 ? static_cast<long>(e) : edge_of_origin;
      first_edge[to] = origin;
      // Logic nodes are passed through within the same move.
      if (tree.node(to).kind == NodeKind::Logic)
        self(to, origin, self);
      else
        queue.push_back(to);
    }
  };
  expand(node, -1, expand);
  while (!queue.empty()) {
    const auto n = queue.front();
    queue.pop_front();
    if (n == target) return static_cast<std::size_t>(first_edge[n]);
    expand(n, first_edge[n], expand);
  }
  return std::nullopt;
}

BaselinePolicy::BaselinePolicy(std::shared_ptr<const graph::DialogTree> tree,
                               std::shared_ptr<const text::Encoder> encoder, ModeClassifier classifier,
                               bool information_only)
    : tree_(std::move(tree)), classifier_(std::move(classifier)), information_only_(information_only) {
  if (!classifier_.trained()) throw Untrained("baseline needs a trained mode classifier");
  for (const auto& n : tree_->nodes()) node_texts_.push_back(encoder->encode(n.text));
}

void BaselinePolicy::begin_dialog(const sim::Session*) { mode_.reset(); }

void BaselinePolicy::classify(const env::Observation& obs) {
  if (mode_) return;
  mode_ = classifier_.predict(obs.initial_utterance, node_texts_[tree_->start()]);
  if (*mode_ == DialogMode::Free) target_ = retrieve_free(*tree_, node_texts_, obs.initial_utterance, information_only_);
}

std::optional<DialogMode> BaselinePolicy::predict_mode(const env::Observation& obs) {
  classify(obs);
  return mode_;
}

std::size_t BaselinePolicy::act(const env::Observation& obs, const std::vector<env::ActionInput>& candidates) {
  classify(obs);
  const bool after_skip = obs.last_action[env::kLastSkipSlot] > 0.5f;
  if (*mode_ == DialogMode::Guided) {
    if (after_skip || candidates.size() < 2) return 0;
    return step_guided(candidates, obs.current_utterance);
  }

  if (obs.node == target_) return 0;
  // A Variable is asked on arrival so that the answer fills it.
  if (tree_->node(obs.node).kind == NodeKind::Variable && after_skip) return 0;
  const auto edge = first_skip_toward(*tree_, obs.node, target_);
  return edge ? *edge + 1 : 0;
}

}  // namespace cts::baseline
