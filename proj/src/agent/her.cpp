#include "cts/agent/her.hpp"

#include <set>

#include "cts/common/error.hpp"
#include "cts/graph/paths.hpp"

namespace cts::agent {

using graph::ActionKind;
using sim::DialogMode;
using sim::DoneReason;

namespace {

struct Cut {
  std::size_t goal = 0;
  std::size_t last = 0;  // last kept turn
  bool synthetic = false;
  std::vector<std::size_t> path;
  graph::Beliefstate constraints;
};

std::optional<Cut> find_cut(const Episode& ep, const graph::DialogTree& tree, const graph::UtteranceCorpus& corpus,
                            const sim::SimConfig& config) {
  const auto& turns = ep.transcript.turns;
  std::set<std::size_t> tried;
  for (std::size_t t = turns.size(); t-- > 0;) {
    const auto x = turns[t].landed;
    if (!tried.insert(x).second) continue;
    const auto& node = tree.node(x);
    if (node.kind != graph::NodeKind::Information || corpus.faq_texts(node, config.split).empty()) continue;

    Cut cut;
    cut.goal = x;
    std::optional<std::size_t> first_ask, first_arrival;
    for (std::size_t k = 0; k < turns.size(); ++k) {
      if (turns[k].action == ActionKind::Ask && turns[k].node == x && !first_ask) first_ask = k;
      if (turns[k].action == ActionKind::Skip && turns[k].landed == x && !first_arrival) first_arrival = k;
    }
    if (first_ask && (!first_arrival || *first_ask < *first_arrival)) {
      cut.last = *first_ask;
    } else {
      cut.last = *first_arrival;
      cut.synthetic = true;
      if (static_cast<int>(cut.last) + 2 > config.stop.max_turns) continue;
    }
    cut.constraints = ep.beliefs[cut.last];
    try {
      cut.path = graph::path_nodes(tree, graph::shortest_constrained_path(tree, tree.start(), x, cut.constraints));
    } catch (const Unreachable&) {
      cut.constraints.clear();
      try {
        cut.path = graph::path_nodes(tree, graph::shortest_constrained_path(tree, tree.start(), x, {}));
      } catch (const Unreachable&) {
        continue;
      }
    }
    if (cut.path.empty()) cut.path.push_back(x);
    return cut;
  }
  return std::nullopt;
}

}  // namespace

std::optional<RelabeledEpisode> her_relabel(const Episode& ep, const graph::DialogTree& tree,
                                            const graph::UtteranceCorpus& corpus, const sim::SimConfig& config,
                                            const UserEncoder& encode_user, Rng& rng) {
  if (ep.transcript.mode != DialogMode::Free || ep.transcript.turns.empty()) return std::nullopt;
  if (ep.observations.size() != ep.actions.size() + 1 || ep.beliefs.size() != ep.actions.size() ||
      ep.actions.size() != ep.transcript.turns.size())
    throw DimensionMismatch("episode observations, actions and turns are inconsistent");
  const auto cut = find_cut(ep, tree, corpus, config);
  if (!cut) return std::nullopt;

  const auto questions = corpus.faq_texts(tree.node(cut->goal), config.split);
  const auto& question = questions[rng.index(questions.size())];
  const env::Embedding plain = encode_user(question);
  const env::Embedding tagged = encode_user(sim::HistoryTurn{true, question}.tagged());

  RelabeledEpisode out;
  auto rewrite = [&](env::Observation obs) {
    obs.history_sum += tagged - ep.initial_tagged;
    obs.initial_utterance = plain;
    if (obs.current_is_initial) obs.current_utterance = plain;
    return obs;
  };
  for (std::size_t t = 0; t <= cut->last + 1; ++t) out.observations.push_back(rewrite(ep.observations[t]));
  out.actions.assign(ep.actions.begin(), ep.actions.begin() + static_cast<std::ptrdiff_t>(cut->last) + 1);

  auto& tr = out.transcript;
  tr.mode = DialogMode::Free;
  tr.goal = cut->goal;
  tr.constraints = cut->constraints;
  tr.goal_path = cut->path;
  tr.initial_utterance = question;
  std::vector<bool> on_path(tree.size(), false);
  for (auto n : cut->path) on_path[n] = true;

  const auto& rc = config.reward;
  for (std::size_t t = 0; t <= cut->last; ++t) {
    auto turn = ep.transcript.turns[t];
    turn.turn_goal.reset();
    turn.done = DoneReason::None;
    if (turn.action == ActionKind::Skip) {
      turn.reward = rc.free_step;
    } else if (turn.node == cut->goal) {
      turn.reward = rc.free_goal(tree);
      turn.done = DoneReason::GoalPresented;
    } else {
      turn.reward = rc.free_step + (on_path[turn.node] ? 0.0 : rc.free_offpath_ask);
    }
    out.rewards.push_back(turn.reward);
    tr.turns.push_back(std::move(turn));
  }
  if (cut->synthetic) {
    sim::TurnRecord ask;
    ask.turn = static_cast<int>(cut->last) + 2;
    ask.node = cut->goal;
    ask.action = ActionKind::Ask;
    ask.landed = cut->goal;
    ask.reward = rc.free_goal(tree);
    ask.done = DoneReason::GoalPresented;
    tr.turns.push_back(ask);
    out.rewards.push_back(ask.reward);
    out.actions.push_back(0);
    out.observations.push_back(out.observations.back());
  }
  return out;
}

}  // namespace cts::agent
