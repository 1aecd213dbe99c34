#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cts/common/rng.hpp"
#include "cts/graph/corpus.hpp"
#include "cts/graph/paths.hpp"
#include "cts/graph/tree.hpp"
#include "cts/sim/dialog_state.hpp"

namespace cts::sim {

enum class DialogMode { Guided, Free };

enum class DoneReason { None, GoalPresented, PatienceExhausted, LeafReached, MaxTurns };

std::string to_string(DialogMode mode);
std::string to_string(DoneReason reason);
DialogMode dialog_mode_from_string(const std::string& name);
DoneReason done_reason_from_string(const std::string& name);

struct RewardConstants {
  double guided_ask_after_skip = 2.0;
  double guided_correct_skip = 3.0;
  double guided_step = -1.0;
  double free_step = -1.0;
  double free_offpath_ask = -4.0;
  double free_goal_per_depth = 4.0;

  double free_goal(const graph::DialogTree& tree) const { return free_goal_per_depth * tree.max_depth(); }
  /// Largest reward magnitude; dividing by it maps rewards into [-1, 1].
  double normalizer(const graph::DialogTree& tree) const;
};

struct StopRules {
  int max_turns = 50;
  int patience = 3;
};

struct SimConfig {
  RewardConstants reward;
  StopRules stop;
  graph::CorpusSplit split = graph::CorpusSplit::Train;
  double free_probability = 0.5;
};

/// What the simulated user wants. For Guided dialogs `goal` is the current
/// turn-goal and changes after every node transition.
struct SimulatorGoal {
  DialogMode mode = DialogMode::Guided;
  std::size_t goal = 0;
  graph::Beliefstate constraints;  // Free only
  std::map<std::string, std::string> constraint_texts;  // how the user states each constraint
  graph::Path goal_path;                                // Free only
  std::size_t goal_edge = 0;                            // Guided: edge of Start toward the goal
  std::string initial_utterance;
};

/// A variable value as a user would state it.
struct SpokenValue {
  graph::Value value;
  std::string text;
};

/// Uniformly random legal value: numbers are 1..60 of a random unit.
SpokenValue sample_value(const graph::VariableSpec& spec, Rng& rng);

/// Draws mode, goal, constraints and initial utterance. Throws
/// NoEligibleGoal if a Free dialog is requested but no Information node has
/// FAQ questions in the split.
SimulatorGoal start_dialog(const graph::DialogTree& tree, const graph::UtteranceCorpus& corpus,
                           const SimConfig& config, Rng& rng, std::optional<DialogMode> force_mode = {});

struct TurnRecord {
  int turn = 0;
  std::size_t node = 0;  // where the action was taken
  graph::ActionKind action = graph::ActionKind::Ask;
  std::optional<std::size_t> edge;  // SKIP only
  std::size_t landed = 0;
  std::string utterance;
  double reward = 0.0;
  DoneReason done = DoneReason::None;
  /// Guided: turn-goal in force when the action was taken.
  std::optional<std::size_t> turn_goal;
  std::optional<DialogMode> mode_prediction;
};

struct Transcript {
  DialogMode mode = DialogMode::Guided;
  std::size_t goal = 0;  // Free goal; Guided: first turn-goal
  graph::Beliefstate constraints;
  std::vector<std::size_t> goal_path;  // Free: nodes from Start to the goal
  std::string initial_utterance;
  std::vector<TurnRecord> turns;
};

struct Response {
  std::string utterance;  // empty when the user says nothing
  double reward = 0.0;
  bool done = false;
  DoneReason reason = DoneReason::None;
  std::size_t landed = 0;
};

/// One simulated dialog. Actions are indices into actions_at(current node):
/// 0 is ASK and i > 0 is SKIP along answer edge i - 1.
class Session {
 public:
  Session(std::shared_ptr<const graph::DialogTree> tree, std::shared_ptr<const graph::UtteranceCorpus> corpus,
          SimConfig config, std::uint64_t seed, std::optional<DialogMode> force_mode = {});

  /// Throws SessionClosed after termination and IndexOutOfRange for a bad
  /// action.
  Response respond(std::size_t action);

  /// Attaches the policy's mode guess to the most recent turn.
  void annotate_mode(DialogMode predicted);

  const graph::DialogTree& tree() const { return *tree_; }
  const SimulatorGoal& goal() const { return goal_; }
  const DialogState& state() const { return state_; }
  const Transcript& transcript() const { return transcript_; }
  std::optional<std::size_t> turn_goal() const;
  bool done() const { return reason_ != DoneReason::None; }
  DoneReason reason() const { return reason_; }
  std::size_t action_count() const { return tree_->node(state_.node).answers.size() + 1; }

  bool guided_success() const;
  bool free_success() const;
  bool success() const { return goal_.mode == DialogMode::Guided ? guided_success() : free_success(); }

 private:
  struct TurnGoal {
    std::size_t edge = 0;
    std::size_t target = 0;
    std::optional<SpokenValue> value;  // Variable nodes
  };

  void sample_turn_goal();
  std::string guided_answer();
  std::string free_answer();
  bool on_path(std::size_t node) const;

  std::shared_ptr<const graph::DialogTree> tree_;
  std::shared_ptr<const graph::UtteranceCorpus> corpus_;
  SimConfig config_;
  Rng rng_;
  SimulatorGoal goal_;
  DialogState state_;
  Transcript transcript_;
  std::optional<TurnGoal> turn_goal_;
  std::vector<bool> on_path_;
  DoneReason reason_ = DoneReason::None;
  bool guided_ok_ = true;
  bool goal_asked_ = false;
};

/// Transcript as JSON lines: a "start" record, then one record per turn.
std::string transcript_to_jsonl(const graph::DialogTree& tree, const Transcript& transcript);
/// Inverse of transcript_to_jsonl. Throws ParseError.
Transcript transcript_from_jsonl(const graph::DialogTree& tree, const std::string& text);

}  // namespace cts::sim

namespace cts::sim {

/// Action of a policy that knows the user's goal: Free follows the goal path
/// (asking only Variable nodes, then the goal); Guided alternates ASK and a
/// SKIP onto the turn-goal.
std::size_t oracle_action(const Session& session);

}  // namespace cts::sim
