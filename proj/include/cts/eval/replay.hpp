#pragma once

#include <string>
#include <vector>

#include "cts/eval/metrics.hpp"
#include "cts/sim/simulator.hpp"

namespace cts::eval {

/// Result of re-deriving a transcript from the reward constants and stop
/// rules alone.
struct ReplayVerdict {
  bool consistent = true;
  std::string problem;  // first mismatch, if any
  std::vector<double> rewards;
  sim::DoneReason reason = sim::DoneReason::None;
  bool success = false;
};

/// Checks actions, landings, rewards and termination of one transcript
/// against the tree. Independent of the simulator implementation.
ReplayVerdict replay_transcript(const graph::DialogTree& tree, const sim::Transcript& transcript,
                                const sim::RewardConstants& rewards = {}, const sim::StopRules& stop = {});

/// Metrics recomputed from transcripts via replay verdicts.
Metrics replay_metrics(const graph::DialogTree& tree, const std::vector<sim::Transcript>& transcripts,
                       const sim::RewardConstants& rewards = {}, const sim::StopRules& stop = {});

}  // namespace cts::eval
