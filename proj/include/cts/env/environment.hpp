#pragma once

#include <memory>
#include <optional>

#include "cts/env/observation.hpp"
#include "cts/graph/corpus.hpp"
#include "cts/sim/simulator.hpp"

namespace cts::env {

/// Everything a dialog needs besides configuration.
struct World {
  std::shared_ptr<const graph::DialogTree> tree;
  std::shared_ptr<const graph::UtteranceCorpus> corpus;
  std::shared_ptr<const text::Encoder> encoder;
};

struct EnvConfig {
  sim::SimConfig sim;
  ObsMask mask;
  double noise = 0.0;
  bool isotropic_noise = false;
};

struct StepResult {
  Observation obs;
  std::vector<ActionInput> candidates;
  double reward = 0.0;      // normalized to [-1, 1]
  double raw_reward = 0.0;  // simulator constants
  bool done = false;
  sim::DoneReason reason = sim::DoneReason::None;
};

/// The simulator as an episodic decision process over assembled features.
class Environment {
 public:
  Environment(std::shared_ptr<const graph::DialogTree> tree, std::shared_ptr<const graph::UtteranceCorpus> corpus,
              std::shared_ptr<const text::Encoder> encoder, EnvConfig config);
  Environment(const World& world, EnvConfig config) : Environment(world.tree, world.corpus, world.encoder, config) {}

  /// Starts a dialog; the returned reward is zero.
  StepResult reset(std::uint64_t seed, std::optional<sim::DialogMode> force_mode = {});
  /// Throws IndexOutOfRange for an unavailable action and SessionClosed
  /// after termination.
  StepResult step(std::size_t action);

  const sim::Session& session() const { return *session_; }
  sim::Session& session() { return *session_; }
  const ObservationBuilder& builder() const { return builder_; }
  const FeatureLayout& layout() const { return builder_.layout(); }
  const EnvConfig& config() const { return config_; }
  const std::shared_ptr<const graph::DialogTree>& tree() const { return tree_; }
  const std::shared_ptr<const graph::UtteranceCorpus>& corpus() const { return corpus_; }
  double normalizer() const { return normalizer_; }
  const EncodedHistory& history() const { return history_; }
  /// Noisy encoding of a fresh text, drawn from this environment's noise stream.
  Embedding encode_user(const std::string& text);

 private:
  StepResult current(double raw_reward) const;

  std::shared_ptr<const graph::DialogTree> tree_;
  std::shared_ptr<const graph::UtteranceCorpus> corpus_;
  EnvConfig config_;
  ObservationBuilder builder_;
  std::unique_ptr<sim::Session> session_;
  EncodedHistory history_;
  Rng noise_rng_;
  double normalizer_ = 1.0;
};

/// Encoder with every tree text and corpus utterance memoized.
std::shared_ptr<const text::Encoder> memoize_world(std::shared_ptr<const text::Encoder> encoder,
                                                   const graph::DialogTree& tree,
                                                   const graph::UtteranceCorpus& corpus);

}  // namespace cts::env

namespace cts::env {

/// Loads a tree, its corpus (derived from the tree when `corpus_path` is
/// empty) and an encoder: the embeddings file when given, with the hashed
/// n-gram encoder of `dim` as fallback. Every known text is memoized.
World load_world(const std::string& tree_path, const std::string& corpus_path, const std::string& embeddings_path,
                 int dim);

}  // namespace cts::env
