#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cts/env/environment.hpp"
#include "cts/eval/policy.hpp"
#include "cts/nn/checkpoint.hpp"

namespace cts::baseline {

struct ClassifierConfig {
  int dialogs = 2000;
  int epochs = 5;
  int batch = 32;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

/// Logistic regression from [initial utterance; Start text] to P(Free).
class ModeClassifier {
 public:
  /// Trains on opening observations of simulated dialogs drawn with
  /// `env_config` (its split and noise apply).
  static ModeClassifier train(const env::World& world, const env::EnvConfig& env_config,
                              const ClassifierConfig& config = {});
  ModeClassifier() = default;
  ModeClassifier(Eigen::VectorXd weights, double bias) : w_(std::move(weights)), b_(bias) {}

  bool trained() const { return w_.size() > 0; }
  /// Throws Untrained.
  double probability_free(const env::Embedding& initial, const env::Embedding& start_text) const;
  sim::DialogMode predict(const env::Embedding& initial, const env::Embedding& start_text) const {
    return probability_free(initial, start_text) >= 0.5 ? sim::DialogMode::Free : sim::DialogMode::Guided;
  }

  nn::Checkpoint to_checkpoint() const;
  /// Throws CheckpointError if the file holds no classifier.
  static ModeClassifier from_checkpoint(const nn::Checkpoint& checkpoint);

 private:
  Eigen::VectorXd w_;
  double b_ = 0.0;
};

/// Node whose text is most similar to `utterance` among nodes with text
/// (Information nodes only if `information_only`); ties go to the lowest
/// index. Throws NoEligibleGoal if no node qualifies.
std::size_t retrieve_free(const graph::DialogTree& tree, const std::vector<env::Embedding>& node_texts,
                          const env::Embedding& utterance, bool information_only = false);

/// Candidate whose answer text is most similar to `utterance`; ties go to
/// file order. Throws NoAnswers if no candidate is a SKIP.
std::size_t step_guided(const std::vector<env::ActionInput>& candidates, const env::Embedding& utterance);

/// First action toward `target` from `node` along a shortest edge path,
/// treating a Logic node as able to take any of its branches. nullopt if
/// `target` is unreachable.
std::optional<std::size_t> first_skip_toward(const graph::DialogTree& tree, std::size_t node, std::size_t target);

/// Classify the opening, then retrieve-and-navigate (Free) or alternate ASK
/// with similarity-ranked SKIPs (Guided).
class BaselinePolicy final : public eval::Policy {
 public:
  BaselinePolicy(std::shared_ptr<const graph::DialogTree> tree, std::shared_ptr<const text::Encoder> encoder,
                 ModeClassifier classifier, bool information_only = false);

  std::string name() const override { return "baseline"; }
  void begin_dialog(const sim::Session*) override;
  std::size_t act(const env::Observation& obs, const std::vector<env::ActionInput>& candidates) override;
  std::optional<sim::DialogMode> predict_mode(const env::Observation& obs) override;

 private:
  void classify(const env::Observation& obs);

  std::shared_ptr<const graph::DialogTree> tree_;
  std::vector<env::Embedding> node_texts_;
  ModeClassifier classifier_;
  bool information_only_ = false;
  std::optional<sim::DialogMode> mode_;
  std::size_t target_ = 0;
};

}  // namespace cts::baseline
