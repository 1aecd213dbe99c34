#include "cts/env/environment.hpp"

#include <cmath>

#include "cts/common/error.hpp"
#include "cts/graph/tree_io.hpp"

namespace cts::env {

Environment::Environment(std::shared_ptr<const graph::DialogTree> tree,
                         std::shared_ptr<const graph::UtteranceCorpus> corpus,
                         std::shared_ptr<const text::Encoder> encoder, EnvConfig config)
    : tree_(std::move(tree)),
      corpus_(std::move(corpus)),
      config_(std::move(config)),
      builder_(tree_, std::move(encoder), config_.mask),
      normalizer_(config_.sim.reward.normalizer(*tree_)) {
  if (config_.noise < 0) throw InvalidParams("noise level must be non-negative");
}

StepResult Environment::reset(std::uint64_t seed, std::optional<sim::DialogMode> force_mode) {
  session_ = std::make_unique<sim::Session>(tree_, corpus_, config_.sim, seed, force_mode);
  noise_rng_ = Rng(derive_seed(seed, 0x6e6f697365ULL));
  history_.clear();
  history_.sync(session_->state(), builder_.encoder(), config_.noise, config_.isotropic_noise, noise_rng_);
  return current(0.0);
}

StepResult Environment::step(std::size_t action) {
  if (!session_) throw SessionClosed("environment was never reset");
  const auto response = session_->respond(action);
  history_.sync(session_->state(), builder_.encoder(), config_.noise, config_.isotropic_noise, noise_rng_);
  return current(response.reward);
}

Embedding Environment::encode_user(const std::string& text) {
  return text::add_noise(builder_.encoder().encode(text), config_.noise, noise_rng_, config_.isotropic_noise);
}

StepResult Environment::current(double raw_reward) const {
  StepResult r;
  r.obs = builder_.observe(session_->state(), history_, session_->goal().mode);
  r.candidates = builder_.candidates(session_->state().node);
  r.raw_reward = raw_reward;
  r.reward = std::clamp(raw_reward / normalizer_, -1.0, 1.0);
  r.done = session_->done();
  r.reason = session_->reason();
  return r;
}

std::shared_ptr<const text::Encoder> memoize_world(std::shared_ptr<const text::Encoder> encoder,
                                                   const graph::DialogTree& tree,
                                                   const graph::UtteranceCorpus& corpus) {
  std::vector<std::string> texts;
  auto add_user = [&](const std::string& t) {
    texts.push_back(t);
    texts.push_back("USR: " + t);
  };
  for (const auto& n : tree.nodes()) {
    texts.push_back(n.text);
    texts.push_back("SYS: " + n.text);
    for (const auto& e : n.answers) add_user(e.text);
    for (const auto& q : n.faq) add_user(q);
  }
  for (const auto& [id, p] : corpus.answers) {
    for (const auto& t : p.train) add_user(t);
    for (const auto& t : p.test) add_user(t);
  }
  for (const auto& [id, p] : corpus.faq) {
    for (const auto& t : p.train) add_user(t);
    for (const auto& t : p.test) add_user(t);
  }
  return std::make_shared<text::EncodingTable>(std::move(encoder), texts);
}

}  // namespace cts::env

namespace cts::env {

World load_world(const std::string& tree_path, const std::string& corpus_path, const std::string& embeddings_path,
                 int dim) {
  World w;
  auto tree = std::make_shared<graph::DialogTree>(graph::load_tree(tree_path));
  w.corpus = std::make_shared<graph::UtteranceCorpus>(corpus_path.empty() ? graph::UtteranceCorpus::from_tree(*tree)
                                                                          : graph::load_corpus(corpus_path));
  std::shared_ptr<const text::Encoder> encoder = std::make_shared<text::HashedNgramEncoder>(dim);
  if (!embeddings_path.empty()) {
    auto file = std::make_shared<text::FileEncoder>(text::FileEncoder::load(embeddings_path, encoder));
    encoder = std::move(file);
  }
  w.encoder = memoize_world(std::move(encoder), *tree, *w.corpus);
  w.tree = std::move(tree);
  return w;
}

}  // namespace cts::env
