#include "cts/sim/dialog_state.hpp"

#include "cts/common/error.hpp"
#include "cts/graph/logic.hpp"

namespace cts::sim {

using graph::NodeKind;

std::size_t resolve_landing(const graph::DialogTree& tree, std::size_t node,
                            const graph::Beliefstate& beliefstate) {
  // Validation forbids Logic cycles only implicitly; bound the walk anyway.
  for (std::size_t hops = 0; tree.node(node).kind == NodeKind::Logic; ++hops) {
    if (hops > tree.size()) throw ValidationError("logic nodes form a cycle at '" + tree.node(node).id + "'");
    const auto& n = tree.node(node);
    node = n.answers[graph::select_logic_edge_lenient(n, beliefstate)].target_index;
  }
  return node;
}

DialogState DialogState::begin(const graph::DialogTree& tree, const std::string& initial_utterance) {
  DialogState s;
  s.node = tree.start();
  s.ask_counts.assign(tree.size(), 0);
  s.ask_counts[tree.start()] = 1;
  s.initial_utterance = initial_utterance;
  s.current_utterance = initial_utterance;
  s.history.push_back({false, tree.node(tree.start()).text});
  if (!initial_utterance.empty()) s.history.push_back({true, initial_utterance});
  return s;
}

int DialogState::ask(const graph::DialogTree& tree) {
  last_action = graph::ActionKind::Ask;
  ++turns;
  const auto& text = tree.node(node).text;
  if (!text.empty()) history.push_back({false, text});
  return ++ask_counts[node];
}

std::size_t DialogState::skip(const graph::DialogTree& tree, std::size_t edge) {
  const auto& n = tree.node(node);
  if (edge >= n.answers.size())
    throw IndexOutOfRange("node '" + n.id + "' has no answer edge " + std::to_string(edge));
  last_action = graph::ActionKind::Skip;
  ++turns;
  node = resolve_landing(tree, n.answers[edge].target_index, beliefstate);
  return node;
}

void DialogState::hear(const std::string& utterance) {
  if (utterance.empty()) return;
  current_utterance = utterance;
  history.push_back({true, utterance});
}

}  // namespace cts::sim
