#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "cts/agent/agent.hpp"
#include "cts/agent/her.hpp"
#include "cts/agent/learning.hpp"
#include "cts/eval/metrics.hpp"
#include "cts/nn/adam.hpp"

namespace cts::agent {

struct TrainLosses {
  double q_loss = 0.0;
  double intent_loss = 0.0;
};

struct TrainLogRow {
  long turn = 0;
  eval::Metrics metrics;
  double epsilon = 0.0;
  TrainLosses losses;  // mean over train steps since the previous row
};

/// One JSON object per line.
std::string log_row_json(const TrainLogRow& row);

struct TrainResult {
  nn::Checkpoint best;
  eval::Metrics best_metrics;
  long best_turn = 0;
  std::vector<TrainLogRow> log;
  long train_steps = 0;
};

/// Flattened candidate inputs of every node.
class CandidateTable {
 public:
  explicit CandidateTable(const env::ObservationBuilder& builder);
  const Mat<float>& at(std::size_t node) const { return table_.at(node); }

 private:
  std::vector<Mat<float>> table_;
};

QBatch<float> make_batch(const std::vector<const StoredState*>& states, const CandidateTable& candidates);

/// Online and target networks, replay buffer and the training loop.
class Trainer {
 public:
  Trainer(env::World world, TrainerConfig config);

  /// Runs the whole schedule. Each evaluation row is also written to `log`
  /// when given, and `progress` is called after it.
  TrainResult run(std::ostream* log = nullptr, const std::function<void(const TrainLogRow&)>& progress = {});

  /// One gradient step on a prioritized batch. Throws BufferTooSmall.
  TrainLosses train_step();
  /// Stores the transitions of a finished episode (and its relabeling).
  void store_episode(const Episode& episode, bool success);
  eval::Metrics evaluate();

  QNet& online() { return *online_; }
  QNet& target() { return *target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  ReplayBuffer& buffer() { return buffer_; }
  env::Environment& environment() { return env_; }
  const TrainerConfig& config() const { return config_; }
  long train_steps() const { return train_steps_; }
  long relabeled() const { return relabeled_; }

 private:
  std::shared_ptr<StoredState> store(const env::Observation& obs) const;

  env::World world_;
  TrainerConfig config_;
  env::Environment env_;
  CandidateTable candidates_;
  std::shared_ptr<QNet> online_;
  std::shared_ptr<QNet> target_;
  nn::Adam<float> adam_;
  ReplayBuffer buffer_;
  Rng act_rng_, sample_rng_, dropout_rng_, her_rng_;
  long train_steps_ = 0;
  long relabeled_ = 0;
};

}  // namespace cts::agent
