#include "cts/env/observation.hpp"

#include <algorithm>

#include "cts/common/error.hpp"
#include "cts/graph/position.hpp"

namespace cts::env {

namespace {

struct MaskEntry {
  const char* name;
  bool ObsMask::*flag;
};

constexpr MaskEntry kMaskEntries[] = {
    {"action_positions", &ObsMask::action_positions},
    {"action_text", &ObsMask::action_text},
    {"node_text", &ObsMask::node_text},
    {"node_positions", &ObsMask::node_positions},
    {"node_type", &ObsMask::node_type},
    {"mode_prediction", &ObsMask::mode_prediction},
    {"beliefstate", &ObsMask::beliefstate},
    {"history", &ObsMask::history},
};

float* put(float* out, const float* begin, std::size_t n) { return std::copy(begin, begin + n, out); }

float* put(float* out, const Embedding& e) { return put(out, e.data(), static_cast<std::size_t>(e.size())); }

}  // namespace

ObsMask ObsMask::without(const std::vector<std::string>& disabled) {
  ObsMask mask;
  for (const auto& name : disabled) {
    if (name.empty()) continue;
    const auto it = std::find_if(std::begin(kMaskEntries), std::end(kMaskEntries),
                                 [&](const MaskEntry& e) { return name == e.name; });
    if (it == std::end(kMaskEntries)) throw ConfigError("unknown ablation '" + name + "'");
    mask.*(it->flag) = false;
  }
  return mask;
}

std::vector<std::string> ObsMask::disabled() const {
  std::vector<std::string> out;
  for (const auto& e : kMaskEntries)
    if (!(this->*(e.flag))) out.emplace_back(e.name);
  return out;
}

Embedding Observation::history() const {
  if (history_count == 0) return Embedding::Zero(history_sum.size());
  return history_sum / static_cast<float>(history_count);
}

FeatureLayout::FeatureLayout(const graph::DialogTree& tree, int embedding_dim, const ObsMask& m)
    : mask(m),
      variables(tree.variable_nodes().size()),
      position(graph::position_width(tree)),
      embedding(static_cast<std::size_t>(embedding_dim)),
      action_width(static_cast<std::size_t>(tree.max_actions()) + 1) {}

std::size_t FeatureLayout::state_dim() const {
  std::size_t d = 3 + 2 * embedding;  // last action, initial and current utterance
  if (mask.beliefstate) d += variables;
  if (mask.node_type) d += graph::kNodeKindCount;
  if (mask.node_positions) d += position;
  if (mask.history) d += embedding;
  if (mask.node_text) d += embedding;
  return d;
}

std::size_t FeatureLayout::action_dim() const {
  std::size_t d = 1;  // is_ask
  if (mask.action_positions) d += action_width;
  if (mask.action_text) d += embedding;
  return d;
}

void flatten_state(const Observation& obs, const FeatureLayout& layout, float* out) {
  const auto& m = layout.mask;
  if (m.beliefstate) out = put(out, obs.beliefstate.data(), obs.beliefstate.size());
  out = put(out, obs.last_action.data(), obs.last_action.size());
  if (m.node_type) out = put(out, obs.node_type.data(), obs.node_type.size());
  if (m.node_positions) out = put(out, obs.position.data(), obs.position.size());
  if (m.history) {
    if (obs.history_count > 0) {
      const float inv = 1.0f / static_cast<float>(obs.history_count);
      for (Eigen::Index i = 0; i < obs.history_sum.size(); ++i) *out++ = obs.history_sum[i] * inv;
    } else {
      out = std::fill_n(out, layout.embedding, 0.0f);
    }
  }
  out = put(out, obs.initial_utterance);
  out = put(out, obs.current_utterance);
  if (m.node_text) put(out, obs.node_text);
}

std::vector<float> flatten_state(const Observation& obs, const FeatureLayout& layout) {
  std::vector<float> v(layout.state_dim());
  flatten_state(obs, layout, v.data());
  return v;
}

void flatten_action(const ActionInput& a, const FeatureLayout& layout, float* out) {
  if (layout.mask.action_positions) {
    if (a.index >= layout.action_width) throw IndexOutOfRange("action index beyond the tree's action width");
    std::fill_n(out, layout.action_width, 0.0f);
    out[a.index] = 1.0f;
    out += layout.action_width;
  }
  if (layout.mask.action_text) out = put(out, a.text);
  *out = a.is_ask ? 1.0f : 0.0f;
}

std::vector<float> flatten_action(const ActionInput& action, const FeatureLayout& layout) {
  std::vector<float> v(layout.action_dim());
  flatten_action(action, layout, v.data());
  return v;
}

Embedding assemble_history(const std::vector<sim::HistoryTurn>& turns, const text::Encoder& encoder) {
  Embedding sum = Embedding::Zero(encoder.dim());
  for (const auto& t : turns) sum += encoder.encode(t.tagged());
  if (!turns.empty()) sum /= static_cast<float>(turns.size());
  return sum;
}

void EncodedHistory::clear() {
  tagged_.clear();
  plain_.clear();
  sum_ = Embedding();
  initial_ = latest_user_ = -1;
}

void EncodedHistory::sync(const sim::DialogState& state, const text::Encoder& encoder, double noise, bool isotropic,
                          Rng& rng) {
  if (sum_.size() == 0) sum_ = Embedding::Zero(encoder.dim());
  for (std::size_t i = tagged_.size(); i < state.history.size(); ++i) {
    const auto& turn = state.history[i];
    Embedding tagged = encoder.encode(turn.tagged());
    Embedding plain;
    if (turn.user) {
      tagged = text::add_noise(tagged, noise, rng, isotropic);
      plain = text::add_noise(encoder.encode(turn.text), noise, rng, isotropic);
      if (initial_ < 0 && turn.text == state.initial_utterance) initial_ = static_cast<long>(i);
      latest_user_ = static_cast<long>(i);
    }
    sum_ += tagged;
    tagged_.push_back(std::move(tagged));
    plain_.push_back(std::move(plain));
  }
}

ObservationBuilder::ObservationBuilder(std::shared_ptr<const graph::DialogTree> tree,
                                       std::shared_ptr<const text::Encoder> encoder, ObsMask mask)
    : tree_(std::move(tree)), encoder_(std::move(encoder)), layout_(*tree_, encoder_->dim(), mask) {
  positions_ = graph::all_position_encodings(*tree_);
  for (const auto& n : tree_->nodes()) {
    node_texts_.push_back(encoder_->encode(n.text));
    std::vector<Embedding> edges;
    for (const auto& e : n.answers) edges.push_back(encoder_->encode(e.text));
    edge_texts_.push_back(std::move(edges));
  }
}

Observation ObservationBuilder::observe(const sim::DialogState& state, const EncodedHistory& history,
                                        sim::DialogMode mode_label) const {
  Observation obs;
  const auto dim = encoder_->dim();
  obs.beliefstate.assign(layout_.variables, 0.0f);
  const auto& vars = tree_->variable_nodes();
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (state.beliefstate.count(tree_->node(vars[i]).variable->name)) obs.beliefstate[i] = 1.0f;
  if (!state.last_action) obs.last_action[kLastNoneSlot] = 1.0f;
  else obs.last_action[*state.last_action == graph::ActionKind::Ask ? kLastAskSlot : kLastSkipSlot] = 1.0f;
  obs.node_type[static_cast<std::size_t>(tree_->node(state.node).kind)] = 1.0f;
  obs.position = positions_[state.node];
  obs.history_sum = history.size() ? history.sum() : Embedding::Zero(dim);
  obs.history_count = static_cast<int>(history.size());
  obs.initial_utterance = history.initial() ? *history.initial() : Embedding::Zero(dim);
  obs.current_utterance = history.latest_user() ? *history.latest_user() : Embedding::Zero(dim);
  obs.current_is_initial = history.latest_is_initial();
  obs.node_text = node_texts_[state.node];
  obs.mode_label = mode_label;
  obs.node = state.node;
  obs.turn = state.turns;
  return obs;
}

std::vector<ActionInput> ObservationBuilder::candidates(std::size_t node) const {
  std::vector<ActionInput> out;
  const auto& edges = edge_texts_[node];
  out.reserve(edges.size() + 1);
  out.push_back({0, Embedding::Zero(encoder_->dim()), true});
  for (std::size_t i = 0; i < edges.size(); ++i) out.push_back({i + 1, edges[i], false});
  return out;
}

}  // namespace cts::env
