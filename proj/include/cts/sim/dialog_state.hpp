#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cts/graph/tree.hpp"

namespace cts::sim {

/// Follows Logic nodes from `node` until a presentable node is reached.
/// Unfilled variables take the default branch.
std::size_t resolve_landing(const graph::DialogTree& tree, std::size_t node,
                            const graph::Beliefstate& beliefstate);

/// One entry of the dialog history; `user` selects the "USR: " tag.
struct HistoryTurn {
  bool user = false;
  std::string text;

  std::string tagged() const { return (user ? "USR: " : "SYS: ") + text; }
};

/// Where a dialog stands: position, filled variables and what was said.
/// Shared by the simulator and live chat sessions.
struct DialogState {
  std::size_t node = 0;
  graph::Beliefstate beliefstate;
  std::vector<int> ask_counts;
  std::optional<graph::ActionKind> last_action;
  int turns = 0;
  std::string initial_utterance;
  std::string current_utterance;
  std::vector<HistoryTurn> history;

  /// Dialog at Start. The Start text counts as presented once and the user's
  /// opening utterance is recorded.
  static DialogState begin(const graph::DialogTree& tree, const std::string& initial_utterance);

  /// Records an ASK of the current node; returns how often it has now been
  /// presented.
  int ask(const graph::DialogTree& tree);
  /// Moves along answer edge `edge` of the current node, resolving Logic
  /// nodes; returns the new node.
  std::size_t skip(const graph::DialogTree& tree, std::size_t edge);
  void hear(const std::string& utterance);
};

}  // namespace cts::sim
