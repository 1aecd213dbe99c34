#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "cts/common/rng.hpp"
#include "cts/graph/tree.hpp"
#include "cts/sim/dialog_state.hpp"
#include "cts/sim/simulator.hpp"
#include "cts/text/encoder.hpp"

namespace cts::env {

using text::Embedding;

/// Which inputs reach the network. Every flag defaults to enabled.
struct ObsMask {
  bool action_positions = true;
  bool action_text = true;
  bool node_text = true;
  bool node_positions = true;
  bool node_type = true;
  bool mode_prediction = true;
  bool beliefstate = true;
  bool history = true;

  /// Mask with the named inputs disabled. Throws ConfigError on unknown names.
  static ObsMask without(const std::vector<std::string>& disabled);
  std::vector<std::string> disabled() const;
  bool operator==(const ObsMask&) const = default;
};

inline constexpr std::size_t kLastAskSlot = 0;
inline constexpr std::size_t kLastSkipSlot = 1;
inline constexpr std::size_t kLastNoneSlot = 2;

/// State features of one dialog turn, kept as segments so that hindsight
/// relabeling can swap the opening utterance.
struct Observation {
  std::vector<float> beliefstate;   // one bit per variable
  std::array<float, 3> last_action{};  // ASK, SKIP, none
  std::array<float, graph::kNodeKindCount> node_type{};
  std::vector<float> position;
  Embedding history_sum;  // sum of turn encodings
  int history_count = 0;
  Embedding initial_utterance;
  Embedding current_utterance;
  Embedding node_text;
  /// The current utterance is still the opening one.
  bool current_is_initial = true;

  sim::DialogMode mode_label = sim::DialogMode::Guided;  // supervision only
  std::size_t node = 0;
  int turn = 0;

  Embedding history() const;
};

/// Per-candidate input of the advantage branch.
struct ActionInput {
  std::size_t index = 0;  // 0 is ASK
  Embedding text;         // edge prototype encoding; zero for ASK
  bool is_ask = true;
};

/// Sizes of the flattened inputs for one tree, encoder and mask.
struct FeatureLayout {
  ObsMask mask;
  std::size_t variables = 0;
  std::size_t position = 0;
  std::size_t embedding = 0;
  std::size_t action_width = 0;  // max_actions + 1

  FeatureLayout() = default;
  FeatureLayout(const graph::DialogTree& tree, int embedding_dim, const ObsMask& mask);

  std::size_t state_dim() const;
  std::size_t action_dim() const;
};

void flatten_state(const Observation& obs, const FeatureLayout& layout, float* out);
std::vector<float> flatten_state(const Observation& obs, const FeatureLayout& layout);
void flatten_action(const ActionInput& action, const FeatureLayout& layout, float* out);
std::vector<float> flatten_action(const ActionInput& action, const FeatureLayout& layout);

/// Mean of `turns` encoded by `encoder`; zero vector for no turns.
Embedding assemble_history(const std::vector<sim::HistoryTurn>& turns, const text::Encoder& encoder);

/// Encodes each history entry once, when it first appears. User texts get
/// input noise, both in their tagged history form and as plain utterances.
class EncodedHistory {
 public:
  void sync(const sim::DialogState& state, const text::Encoder& encoder, double noise, bool isotropic, Rng& rng);
  void clear();

  std::size_t size() const { return tagged_.size(); }
  const Embedding& sum() const { return sum_; }
  /// Plain encodings of the opening and the latest user utterance.
  const Embedding* initial() const { return initial_ < 0 ? nullptr : &plain_[static_cast<std::size_t>(initial_)]; }
  const Embedding* latest_user() const {
    return latest_user_ < 0 ? nullptr : &plain_[static_cast<std::size_t>(latest_user_)];
  }
  bool latest_is_initial() const { return latest_user_ == initial_; }
  /// Tagged encoding of the opening utterance (for relabeling).
  const Embedding* initial_tagged() const {
    return initial_ < 0 ? nullptr : &tagged_[static_cast<std::size_t>(initial_)];
  }

 private:
  std::vector<Embedding> tagged_;
  std::vector<Embedding> plain_;  // user turns only; empty for system turns
  Embedding sum_;
  long initial_ = -1;
  long latest_user_ = -1;
};

/// Assembles observations and candidate inputs from a dialog state.
class ObservationBuilder {
 public:
  ObservationBuilder(std::shared_ptr<const graph::DialogTree> tree, std::shared_ptr<const text::Encoder> encoder,
                     ObsMask mask = {});

  const FeatureLayout& layout() const { return layout_; }
  const graph::DialogTree& tree() const { return *tree_; }
  const text::Encoder& encoder() const { return *encoder_; }

  Observation observe(const sim::DialogState& state, const EncodedHistory& history, sim::DialogMode mode_label) const;
  std::vector<ActionInput> candidates(std::size_t node) const;

 private:
  std::shared_ptr<const graph::DialogTree> tree_;
  std::shared_ptr<const text::Encoder> encoder_;
  FeatureLayout layout_;
  std::vector<std::vector<float>> positions_;
  std::vector<Embedding> node_texts_;
  std::vector<std::vector<Embedding>> edge_texts_;
};

}  // namespace cts::env
