#include "cts/eval/replay.hpp"

#include <algorithm>
#include <cmath>

namespace cts::eval {

using graph::ActionKind;
using graph::NodeKind;
using sim::DialogMode;
using sim::DoneReason;

namespace {

/// Whether `landed` can be reached from `target` through Logic nodes only.
bool logic_reachable(const graph::DialogTree& tree, std::size_t target, std::size_t landed) {
  std::vector<std::size_t> frontier{target};
  std::vector<bool> seen(tree.size(), false);
  while (!frontier.empty()) {
    const auto n = frontier.back();
    frontier.pop_back();
    if (n == landed && tree.node(n).kind != NodeKind::Logic) return true;
    if (seen[n] || tree.node(n).kind != NodeKind::Logic) continue;
    seen[n] = true;
    for (const auto& e : tree.node(n).answers) frontier.push_back(tree.index_of(e.target));
  }
  return false;
}

}  // namespace

ReplayVerdict replay_transcript(const graph::DialogTree& tree, const sim::Transcript& t,
                                const sim::RewardConstants& rc, const sim::StopRules& stop) {
  ReplayVerdict v;
  auto fail = [&v](std::string why) {
    if (v.consistent) v.problem = std::move(why);
    v.consistent = false;
  };
  const bool guided = t.mode == DialogMode::Guided;
  std::vector<int> asked(tree.size(), 0);
  asked[tree.start()] = 1;
  std::vector<bool> on_path(tree.size(), false);
  for (auto n : t.goal_path) on_path[n] = true;

  std::size_t node = tree.start();
  ActionKind prev = ActionKind::Ask;
  bool guided_ok = true;
  bool goal_asked = false;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const auto& r = t.turns[i];
    const std::string where = "turn " + std::to_string(i + 1);
    if (v.reason != DoneReason::None) {
      fail(where + ": action after the dialog ended");
      break;
    }
    if (r.turn != static_cast<int>(i) + 1) fail(where + ": turn number " + std::to_string(r.turn));
    if (r.node != node) fail(where + ": action taken at the wrong node");
    double reward = 0.0;
    if (r.action == ActionKind::Ask) {
      if (r.landed != node) fail(where + ": ASK moved the dialog");
      const int count = ++asked[node];
      if (guided) {
        reward = prev == ActionKind::Skip ? rc.guided_ask_after_skip : rc.guided_step;
      } else if (node == t.goal) {
        reward = rc.free_goal_per_depth * tree.max_depth();
        goal_asked = true;
        v.reason = DoneReason::GoalPresented;
      } else {
        reward = rc.free_step + (on_path[node] ? 0.0 : rc.free_offpath_ask);
      }
      if (v.reason == DoneReason::None && count >= stop.patience) v.reason = DoneReason::PatienceExhausted;
      if (v.reason == DoneReason::None && tree.node(node).answers.empty()) v.reason = DoneReason::LeafReached;
    } else {
      const auto& answers = tree.node(node).answers;
      if (!r.edge || *r.edge >= answers.size()) {
        fail(where + ": SKIP along a missing edge");
        break;
      }
      if (!logic_reachable(tree, tree.index_of(answers[*r.edge].target), r.landed))
        fail(where + ": SKIP landed off its edge");
      if (guided) {
        const bool correct = prev == ActionKind::Ask && r.turn_goal && r.landed == *r.turn_goal;
        reward = correct ? rc.guided_correct_skip : rc.guided_step;
        if (!correct) guided_ok = false;
      } else {
        reward = rc.free_step;
      }
      node = r.landed;
    }
    if (v.reason == DoneReason::None && static_cast<int>(i) + 1 >= stop.max_turns) v.reason = DoneReason::MaxTurns;
    if (std::abs(reward - r.reward) > 1e-9) fail(where + ": reward " + std::to_string(r.reward) + ", expected " +
                                                 std::to_string(reward));
    if (r.done != v.reason)
      fail(where + ": done reason " + sim::to_string(r.done) + ", expected " + sim::to_string(v.reason));
    v.rewards.push_back(reward);
    prev = r.action;
  }
  if (v.reason == DoneReason::None) fail("dialog never ended");
  v.success = guided ? guided_ok && (v.reason == DoneReason::LeafReached || v.reason == DoneReason::MaxTurns)
                     : goal_asked;
  return v;
}

Metrics replay_metrics(const graph::DialogTree& tree, const std::vector<sim::Transcript>& transcripts,
                       const sim::RewardConstants& rewards, const sim::StopRules& stop) {
  std::vector<bool> success;
  for (const auto& t : transcripts) success.push_back(replay_transcript(tree, t, rewards, stop).success);
  return compute_metrics(transcripts, success);
}

}  // namespace cts::eval
