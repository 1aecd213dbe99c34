#include "cts/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "cts/common/error.hpp"
#include "cts/graph/logic.hpp"

namespace cts::sim {

using graph::ActionKind;
using graph::NodeKind;

std::string to_string(DialogMode mode) { return mode == DialogMode::Guided ? "guided" : "free"; }

std::string to_string(DoneReason reason) {
  switch (reason) {
    case DoneReason::None: return "none";
    case DoneReason::GoalPresented: return "goal_presented";
    case DoneReason::PatienceExhausted: return "patience_exhausted";
    case DoneReason::LeafReached: return "leaf_reached";
    case DoneReason::MaxTurns: return "max_turns";
  }
  return "none";
}

DialogMode dialog_mode_from_string(const std::string& name) {
  if (name == "guided") return DialogMode::Guided;
  if (name == "free") return DialogMode::Free;
  throw ParseError("unknown dialog mode '" + name + "'");
}

DoneReason done_reason_from_string(const std::string& name) {
  for (auto r : {DoneReason::None, DoneReason::GoalPresented, DoneReason::PatienceExhausted, DoneReason::LeafReached,
                 DoneReason::MaxTurns})
    if (to_string(r) == name) return r;
  throw ParseError("unknown done reason '" + name + "'");
}

double RewardConstants::normalizer(const graph::DialogTree& tree) const {
  return std::max({std::abs(free_goal(tree)), std::abs(free_step + free_offpath_ask), std::abs(guided_correct_skip),
                   std::abs(guided_ask_after_skip), std::abs(guided_step), 1e-12});
}

SpokenValue sample_value(const graph::VariableSpec& spec, Rng& rng) {
  switch (spec.type) {
    case graph::ValueType::Boolean: {
      const bool b = rng.bernoulli(0.5);
      return {b, b ? "yes" : "no"};
    }
    case graph::ValueType::Category: {
      if (spec.categories.empty()) throw ValidationError("category variable '" + spec.name + "' has no values");
      const auto& c = spec.categories[rng.index(spec.categories.size())];
      return {c, c};
    }
    case graph::ValueType::Number: {
      const double amount = static_cast<double>(rng.between(1, 60));
      if (spec.units.empty()) return {amount, graph::render_value(spec, amount)};
      auto it = spec.units.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng.index(spec.units.size())));
      const double base = amount * it->second;
      return {base, graph::render_value(spec, base, it->first)};
    }
  }
  throw ValidationError("unknown variable type");
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.index(items.size())];
}

bool path_consistent(const graph::DialogTree& tree, const graph::Path& path, const graph::Beliefstate& constraints) {
  graph::Beliefstate bs;
  for (const auto& step : path) {
    const auto& n = tree.node(step.node);
    if (n.kind == NodeKind::Variable) bs[n.variable->name] = constraints.at(n.variable->name);
    if (n.kind == NodeKind::Logic && graph::select_logic_edge_lenient(n, bs) != step.edge) return false;
  }
  return true;
}

}  // namespace

SimulatorGoal start_dialog(const graph::DialogTree& tree, const graph::UtteranceCorpus& corpus,
                           const SimConfig& config, Rng& rng, std::optional<DialogMode> force_mode) {
  SimulatorGoal goal;
  goal.mode = force_mode ? *force_mode : (rng.bernoulli(config.free_probability) ? DialogMode::Free : DialogMode::Guided);

  if (goal.mode == DialogMode::Guided) {
    const auto& start = tree.node(tree.start());
    goal.goal = tree.start();
    if (start.answers.empty()) return goal;
    goal.goal_edge = rng.index(start.answers.size());
    const auto& edge = start.answers[goal.goal_edge];
    goal.goal = resolve_landing(tree, edge.target_index, {});
    const auto texts = corpus.answer_texts(edge, config.split);
    if (!texts.empty()) goal.initial_utterance = pick(texts, rng);
    return goal;
  }

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < tree.size(); ++i)
    if (tree.node(i).kind == NodeKind::Information && !corpus.faq_texts(tree.node(i), config.split).empty())
      eligible.push_back(i);

  while (!eligible.empty()) {
    const auto slot = rng.index(eligible.size());
    const auto g = eligible[slot];
    for (int attempt = 0; attempt < 16; ++attempt) {
      auto path = graph::sample_shortest_path(tree, tree.start(), g, {}, rng);
      for (int draw = 0; draw < 16; ++draw) {
        graph::Beliefstate constraints;
        std::map<std::string, std::string> texts;
        for (const auto& step : path) {
          const auto& n = tree.node(step.node);
          if (n.kind != NodeKind::Variable) continue;
          auto spoken = sample_value(*n.variable, rng);
          constraints[n.variable->name] = spoken.value;
          texts[n.variable->name] = spoken.text;
        }
        if (!path_consistent(tree, path, constraints)) continue;
        goal.goal = g;
        goal.constraints = std::move(constraints);
        goal.constraint_texts = std::move(texts);
        goal.goal_path = std::move(path);
        goal.initial_utterance = pick(corpus.faq_texts(tree.node(g), config.split), rng);
        return goal;
      }
    }
    eligible.erase(eligible.begin() + static_cast<std::ptrdiff_t>(slot));
  }
  throw NoEligibleGoal("no Information node with FAQ questions is reachable under any constraints");
}

Session::Session(std::shared_ptr<const graph::DialogTree> tree, std::shared_ptr<const graph::UtteranceCorpus> corpus,
                 SimConfig config, std::uint64_t seed, std::optional<DialogMode> force_mode)
    : tree_(std::move(tree)), corpus_(std::move(corpus)), config_(config), rng_(seed) {
  goal_ = start_dialog(*tree_, *corpus_, config_, rng_, force_mode);
  state_ = DialogState::begin(*tree_, goal_.initial_utterance);
  on_path_.assign(tree_->size(), false);
  transcript_.mode = goal_.mode;
  transcript_.goal = goal_.goal;
  transcript_.constraints = goal_.constraints;
  transcript_.initial_utterance = goal_.initial_utterance;
  if (goal_.mode == DialogMode::Free) {
    transcript_.goal_path = graph::path_nodes(*tree_, goal_.goal_path);
    for (auto n : transcript_.goal_path) on_path_[n] = true;
  } else if (!tree_->is_leaf(tree_->start())) {
    turn_goal_ = TurnGoal{goal_.goal_edge, goal_.goal, std::nullopt};
  }
}

std::optional<std::size_t> Session::turn_goal() const {
  if (!turn_goal_) return std::nullopt;
  return turn_goal_->target;
}

bool Session::on_path(std::size_t node) const { return on_path_[node]; }

void Session::sample_turn_goal() {
  const auto& n = tree_->node(state_.node);
  turn_goal_.reset();
  if (n.answers.empty()) return;
  TurnGoal tg;
  tg.edge = rng_.index(n.answers.size());
  auto bs = state_.beliefstate;
  if (n.kind == NodeKind::Variable) {
    tg.value = sample_value(*n.variable, rng_);
    bs[n.variable->name] = tg.value->value;
  }
  tg.target = resolve_landing(*tree_, n.answers[tg.edge].target_index, bs);
  turn_goal_ = std::move(tg);
  goal_.goal = turn_goal_->target;
}

std::string Session::guided_answer() {
  const auto& n = tree_->node(state_.node);
  if (n.kind == NodeKind::Information || !turn_goal_) return {};
  if (n.kind == NodeKind::Variable) {
    state_.beliefstate[n.variable->name] = turn_goal_->value->value;
    return turn_goal_->value->text;
  }
  const auto texts = corpus_->answer_texts(n.answers[turn_goal_->edge], config_.split);
  return texts.empty() ? std::string{} : pick(texts, rng_);
}

std::string Session::free_answer() {
  const auto& n = tree_->node(state_.node);
  if (n.kind == NodeKind::Information || n.answers.empty()) return {};
  if (n.kind == NodeKind::Variable) {
    const auto& name = n.variable->name;
    if (on_path(state_.node) && goal_.constraints.count(name)) {
      state_.beliefstate[name] = goal_.constraints.at(name);
      return goal_.constraint_texts.at(name);
    }
    auto spoken = sample_value(*n.variable, rng_);
    state_.beliefstate[name] = spoken.value;
    return spoken.text;
  }
  std::size_t edge = rng_.index(n.answers.size());
  if (on_path(state_.node)) {
    for (const auto& step : goal_.goal_path)
      if (step.node == state_.node) {
        edge = step.edge;
        break;
      }
  }
  const auto texts = corpus_->answer_texts(n.answers[edge], config_.split);
  return texts.empty() ? std::string{} : pick(texts, rng_);
}

Response Session::respond(std::size_t action) {
  if (done()) throw SessionClosed("dialog already ended (" + to_string(reason_) + ")");
  if (action >= action_count())
    throw IndexOutOfRange("action " + std::to_string(action) + " not available at node '" +
                          tree_->node(state_.node).id + "'");
  const auto& rc = config_.reward;
  const bool guided = goal_.mode == DialogMode::Guided;
  // Start is presented implicitly, so the first action follows an ASK.
  const ActionKind prev = state_.last_action.value_or(ActionKind::Ask);

  TurnRecord rec;
  rec.turn = state_.turns + 1;
  rec.node = state_.node;
  if (guided) rec.turn_goal = turn_goal();

  Response out;
  if (action == 0) {
    rec.action = ActionKind::Ask;
    const int presented = state_.ask(*tree_);
    out.utterance = guided ? guided_answer() : free_answer();
    state_.hear(out.utterance);
    if (guided) {
      out.reward = prev == ActionKind::Skip ? rc.guided_ask_after_skip : rc.guided_step;
    } else if (state_.node == goal_.goal) {
      out.reward = rc.free_goal(*tree_);
      goal_asked_ = true;
      reason_ = DoneReason::GoalPresented;
    } else {
      out.reward = rc.free_step + (on_path(state_.node) ? 0.0 : rc.free_offpath_ask);
    }
    if (reason_ == DoneReason::None && presented >= config_.stop.patience) reason_ = DoneReason::PatienceExhausted;
    if (reason_ == DoneReason::None && tree_->is_leaf(state_.node)) reason_ = DoneReason::LeafReached;
  } else {
    rec.action = ActionKind::Skip;
    rec.edge = action - 1;
    const auto landed = state_.skip(*tree_, action - 1);
    if (guided) {
      const bool correct = prev == ActionKind::Ask && turn_goal_ && landed == turn_goal_->target;
      out.reward = correct ? rc.guided_correct_skip : rc.guided_step;
      if (!correct) guided_ok_ = false;
      sample_turn_goal();
    } else {
      out.reward = rc.free_step;
    }
  }
  if (reason_ == DoneReason::None && state_.turns >= config_.stop.max_turns) reason_ = DoneReason::MaxTurns;

  out.landed = state_.node;
  out.done = done();
  out.reason = reason_;
  rec.landed = state_.node;
  rec.utterance = out.utterance;
  rec.reward = out.reward;
  rec.done = reason_;
  transcript_.turns.push_back(std::move(rec));
  return out;
}

void Session::annotate_mode(DialogMode predicted) {
  if (!transcript_.turns.empty()) transcript_.turns.back().mode_prediction = predicted;
}

bool Session::guided_success() const {
  if (goal_.mode != DialogMode::Guided) return false;
  return guided_ok_ && (reason_ == DoneReason::LeafReached || reason_ == DoneReason::MaxTurns);
}

bool Session::free_success() const { return goal_.mode == DialogMode::Free && goal_asked_; }

namespace {

nlohmann::ordered_json value_json(const graph::Value& v) {
  return std::visit([](const auto& x) { return nlohmann::ordered_json(x); }, v);
}

graph::Value json_value(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  return j.get<std::string>();
}

}  // namespace

std::string transcript_to_jsonl(const graph::DialogTree& tree, const Transcript& t) {
  using nlohmann::ordered_json;
  std::ostringstream out;
  ordered_json start;
  start["type"] = "start";
  start["mode"] = to_string(t.mode);
  start["goal"] = tree.node(t.goal).id;
  ordered_json constraints = ordered_json::object();
  for (const auto& [k, v] : t.constraints) constraints[k] = value_json(v);
  start["constraints"] = constraints;
  ordered_json path = ordered_json::array();
  for (auto n : t.goal_path) path.push_back(tree.node(n).id);
  start["goal_path"] = path;
  start["initial_utterance"] = t.initial_utterance;
  out << start.dump() << '\n';
  for (const auto& r : t.turns) {
    ordered_json j;
    j["type"] = "turn";
    j["turn"] = r.turn;
    j["mode"] = to_string(t.mode);
    j["node"] = tree.node(r.node).id;
    j["action"] = graph::to_string(r.action);
    j["edge"] = r.edge ? ordered_json(tree.node(r.node).answers[*r.edge].id) : ordered_json(nullptr);
    j["target"] = r.edge ? ordered_json(tree.node(r.node).answers[*r.edge].target) : ordered_json(nullptr);
    j["landed"] = tree.node(r.landed).id;
    j["utterance"] = r.utterance;
    j["reward"] = r.reward;
    j["done_reason"] = to_string(r.done);
    j["turn_goal"] = r.turn_goal ? ordered_json(tree.node(*r.turn_goal).id) : ordered_json(nullptr);
    j["goal"] = tree.node(t.goal).id;
    j["mode_prediction"] = r.mode_prediction ? ordered_json(to_string(*r.mode_prediction)) : ordered_json(nullptr);
    out << j.dump() << '\n';
  }
  return out.str();
}

Transcript transcript_from_jsonl(const graph::DialogTree& tree, const std::string& text) {
  Transcript t;
  std::istringstream in(text);
  std::string line;
  bool seen_start = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (j.at("type") == "start") {
        seen_start = true;
        t.mode = dialog_mode_from_string(j.at("mode"));
        t.goal = tree.index_of(j.at("goal"));
        for (const auto& [k, v] : j.at("constraints").items()) t.constraints[k] = json_value(v);
        for (const auto& id : j.at("goal_path")) t.goal_path.push_back(tree.index_of(id));
        t.initial_utterance = j.at("initial_utterance");
        continue;
      }
      TurnRecord r;
      r.turn = j.at("turn");
      r.node = tree.index_of(j.at("node"));
      r.action = j.at("action") == "ask" ? ActionKind::Ask : ActionKind::Skip;
      if (!j.at("edge").is_null()) {
        const auto& answers = tree.node(r.node).answers;
        const std::string id = j.at("edge");
        const auto it = std::find_if(answers.begin(), answers.end(), [&](const auto& e) { return e.id == id; });
        if (it == answers.end()) throw ParseError("edge '" + id + "' does not leave node '" + tree.node(r.node).id + "'");
        r.edge = static_cast<std::size_t>(it - answers.begin());
      }
      r.landed = tree.index_of(j.at("landed"));
      r.utterance = j.at("utterance");
      r.reward = j.at("reward");
      r.done = done_reason_from_string(j.at("done_reason"));
      if (!j.at("turn_goal").is_null()) r.turn_goal = tree.index_of(j.at("turn_goal"));
      if (!j.at("mode_prediction").is_null()) r.mode_prediction = dialog_mode_from_string(j.at("mode_prediction"));
      t.turns.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed transcript: ") + e.what());
  }
  if (!seen_start) throw ParseError("transcript has no start record");
  return t;
}

}  // namespace cts::sim

namespace cts::sim {

std::size_t oracle_action(const Session& session) {
  const auto& tree = session.tree();
  const auto& st = session.state();
  const auto& node = tree.node(st.node);
  if (session.goal().mode == DialogMode::Free) {
    if (st.node == session.goal().goal) return 0;
    for (const auto& step : session.goal().goal_path) {
      if (step.node != st.node) continue;
      if (node.kind == NodeKind::Variable && !st.beliefstate.count(node.variable->name)) return 0;
      return step.edge + 1;
    }
    return 0;  // off the path: nothing sensible left to do
  }
  if (st.last_action == ActionKind::Skip || !session.turn_goal()) return 0;
  for (std::size_t e = 0; e < node.answers.size(); ++e)
    if (resolve_landing(tree, node.answers[e].target_index, st.beliefstate) == *session.turn_goal()) return e + 1;
  return 0;
}

}  // namespace cts::sim
