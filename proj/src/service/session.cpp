#include "cts/service/session.hpp"

#include <algorithm>
#include <cctype>

#include "cts/common/hash.hpp"
#include "cts/graph/logic.hpp"
#include "json.hpp"

namespace cts::service {

using graph::ActionKind;
using graph::NodeKind;
using nlohmann::json;

namespace {

bool blank(const std::string& text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

json mode_json(const std::optional<sim::DialogMode>& mode) {
  return mode ? json(sim::to_string(*mode)) : json(nullptr);
}

}  // namespace

std::string reply_json(const ReplyBundle& reply) {
  json j;
  j["asked_node_texts"] = reply.asked_node_texts;
  j["suggestions"] = reply.suggestions;
  j["mode_prediction"] = mode_json(reply.mode_prediction);
  j["skip_trace"] = reply.skip_trace;
  j["done"] = reply.done;
  return j.dump();
}

LiveDialog::LiveDialog(std::shared_ptr<const env::ObservationBuilder> builder, std::unique_ptr<eval::Policy> policy,
                       int max_turns)
    : builder_(std::move(builder)), policy_(std::move(policy)), max_turns_(max_turns) {
  if (!builder_ || !policy_) throw InvalidParams("live dialog needs a builder and a policy");
  state_ = sim::DialogState::begin(builder_->tree(), {});
}

std::string LiveDialog::greeting() const { return builder_->tree().node(builder_->tree().start()).text; }

std::vector<std::string> LiveDialog::suggestions() const {
  std::vector<std::string> out;
  if (done_) return out;
  for (const auto& edge : builder_->tree().node(state_.node).answers)
    if (!edge.text.empty()) out.push_back(edge.text);
  return out;
}

ReplyBundle LiveDialog::send(const std::string& text) {
  if (done_) throw SessionClosed("dialog is finished");
  if (blank(text)) throw EmptyMessage("message text is empty");
  const auto& tree = builder_->tree();

  if (!started_) {
    state_ = sim::DialogState::begin(tree, text);
    policy_->begin_dialog(nullptr);
    history_.clear();
    started_ = true;
  } else {
    const auto& node = tree.node(state_.node);
    if (node.kind == NodeKind::Variable && state_.last_action == ActionKind::Ask)
      if (auto value = graph::parse_value(*node.variable, text)) state_.beliefstate[node.variable->name] = *value;
    state_.hear(text);
  }
  events_.push_back({true, text, {}, ActionKind::Ask, std::nullopt, {}, std::nullopt});

  ReplyBundle reply;
  while (true) {
    history_.sync(state_, builder_->encoder(), 0.0, false, noise_rng_);
    const auto obs = builder_->observe(state_, history_, sim::DialogMode::Guided);
    const auto decision = policy_->decide(obs, builder_->candidates(state_.node));
    reply.mode_prediction = decision.mode;

    LiveEvent ev;
    ev.node = tree.node(state_.node).id;
    ev.mode = decision.mode;
    const auto& node = tree.node(state_.node);
    bool wait = false;
    if (decision.action == 0) {
      state_.ask(tree);
      ev.action = ActionKind::Ask;
      ev.text = node.text;
      reply.asked_node_texts.push_back(node.text);
      if (node.kind == NodeKind::Information) {
        // An answered FAQ, or the end of a guided branch, closes the dialog.
        if (node.answers.empty() || decision.mode == sim::DialogMode::Free) done_ = true;
      } else {
        wait = true;
      }
    } else {
      ev.action = ActionKind::Skip;
      ev.edge = decision.action - 1;
      reply.skip_trace.push_back(node.id);
      state_.skip(tree, decision.action - 1);
    }
    ev.landed = tree.node(state_.node).id;
    events_.push_back(std::move(ev));
    if (state_.turns >= max_turns_) done_ = true;
    if (wait || done_) break;
  }
  reply.done = done_;
  reply.suggestions = suggestions();
  return reply;
}

std::string LiveDialog::trace_json() const {
  json turns = json::array();
  for (const auto& ev : events_) {
    json t;
    if (ev.user) {
      t["user"] = ev.text;
    } else {
      t["node"] = ev.node;
      t["action"] = graph::to_string(ev.action);
      t["edge"] = ev.edge ? json(*ev.edge) : json(nullptr);
      t["landed"] = ev.landed;
      t["mode_prediction"] = mode_json(ev.mode);
      if (ev.action == ActionKind::Ask) t["text"] = ev.text;
    }
    turns.push_back(std::move(t));
  }
  json bs = json::object();
  for (const auto& [name, value] : state_.beliefstate) bs[name] = graph::to_string(value);
  json j;
  j["policy"] = policy_->name();
  j["node"] = builder_->tree().node(state_.node).id;
  j["beliefstate"] = bs;
  j["turns"] = state_.turns;
  j["done"] = done_;
  j["events"] = std::move(turns);
  return j.dump();
}

SessionService::SessionService(std::shared_ptr<const env::ObservationBuilder> builder,
                               std::map<std::string, PolicyFactory> policies, ServiceConfig config,
                               std::uint64_t seed)
    : builder_(std::move(builder)), policies_(std::move(policies)), config_(config), id_rng_(seed) {}

SessionStart SessionService::create(const std::string& policy) {
  const auto it = policies_.find(policy);
  if (it == policies_.end()) throw UnknownPolicy("unknown policy '" + policy + "'");
  auto entry = std::make_shared<Entry>(LiveDialog(builder_, it->second(), config_.max_turns), policy);
  entry->created = entry->last_active = Clock::now();
  SessionStart out;
  out.greeting = entry->dialog.greeting();
  out.suggestions = entry->dialog.suggestions();
  std::lock_guard lock(mutex_);
  do {
    out.id = hex64(id_rng_.next_u64() ^ counter_++);
  } while (sessions_.count(out.id));
  sessions_.emplace(out.id, std::move(entry));
  return out;
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession("no session '" + id + "'");
  return it->second;
}

ReplyBundle SessionService::message(const std::string& id, const std::string& text) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  entry->last_active = Clock::now();
  return entry->dialog.send(text);
}

std::string SessionService::trace_json(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->dialog.trace_json();
}

std::size_t SessionService::expire(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  return std::erase_if(sessions_, [&](const auto& kv) {
    std::unique_lock busy(kv.second->mutex, std::try_to_lock);
    return busy.owns_lock() && now - kv.second->last_active > config_.ttl;
  });
}

std::vector<std::string> SessionService::policies() const {
  std::vector<std::string> out;
  for (const auto& [name, factory] : policies_) out.push_back(name);
  return out;
}

std::size_t SessionService::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace cts::service
