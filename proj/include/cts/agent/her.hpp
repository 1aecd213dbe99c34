#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cts/common/rng.hpp"
#include "cts/env/observation.hpp"
#include "cts/sim/simulator.hpp"

namespace cts::agent {

/// One finished training dialog as seen by the learner.
struct Episode {
  sim::Transcript transcript;
  /// Observation before each action, plus the one after the last action.
  std::vector<env::Observation> observations;
  std::vector<std::size_t> actions;
  /// Beliefstate after each action.
  std::vector<graph::Beliefstate> beliefs;
  /// History encoding of the opening user turn.
  env::Embedding initial_tagged;
};

/// An episode rewritten for a different goal. `rewards` are raw simulator
/// rewards; observations has one more entry than actions.
struct RelabeledEpisode {
  sim::Transcript transcript;
  std::vector<env::Observation> observations;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
};

/// Noisy encoding of a user text.
using UserEncoder = std::function<env::Embedding(const std::string&)>;

/// Hindsight relabeling of a Free episode. Walks the visited nodes backwards;
/// the first Information node with FAQ questions becomes the goal. The
/// episode ends at the goal's first ASK, or, if it was only passed through,
/// at its first arrival where an ASK is appended. One of its questions
/// replaces the opening utterance everywhere, and rewards and termination
/// are recomputed. nullopt if no node qualifies or the episode is Guided.
std::optional<RelabeledEpisode> her_relabel(const Episode& episode, const graph::DialogTree& tree,
                                            const graph::UtteranceCorpus& corpus, const sim::SimConfig& config,
                                            const UserEncoder& encode_user, Rng& rng);

}  // namespace cts::agent
