#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cts/common/error.hpp"
#include "cts/env/observation.hpp"
#include "cts/eval/policy.hpp"
#include "cts/sim/dialog_state.hpp"

namespace cts::service {

CTS_DEFINE_ERROR(UnknownSession);
CTS_DEFINE_ERROR(EmptyMessage);
CTS_DEFINE_ERROR(UnknownPolicy);

/// What the system said in reply to one user message.
struct ReplyBundle {
  std::vector<std::string> asked_node_texts;  // every ASK since the user spoke
  std::vector<std::string> suggestions;       // prototype answers of the current node
  std::optional<sim::DialogMode> mode_prediction;
  std::vector<std::string> skip_trace;  // ids of the nodes skipped
  bool done = false;
};

std::string reply_json(const ReplyBundle& reply);

/// One entry of a live transcript: a user message or a system action.
struct LiveEvent {
  bool user = false;
  std::string text;  // user message, or the asked node text
  std::string node;  // node the action was taken at
  graph::ActionKind action = graph::ActionKind::Ask;
  std::optional<std::size_t> edge;  // SKIP only
  std::string landed;
  std::optional<sim::DialogMode> mode;
};

/// A dialog with a human. Each message runs the policy from the current node
/// until it ASKs at a node that needs an answer, or the dialog ends. Not
/// thread-safe.
class LiveDialog {
 public:
  LiveDialog(std::shared_ptr<const env::ObservationBuilder> builder, std::unique_ptr<eval::Policy> policy,
             int max_turns = 50);

  std::string greeting() const;
  std::vector<std::string> suggestions() const;
  /// Throws SessionClosed once done and EmptyMessage for blank text.
  ReplyBundle send(const std::string& text);

  bool done() const { return done_; }
  bool started() const { return started_; }
  const sim::DialogState& state() const { return state_; }
  const std::vector<LiveEvent>& events() const { return events_; }
  const eval::Policy& policy() const { return *policy_; }
  /// Transcript as a JSON document.
  std::string trace_json() const;

 private:
  std::shared_ptr<const env::ObservationBuilder> builder_;
  std::unique_ptr<eval::Policy> policy_;
  int max_turns_;
  sim::DialogState state_;
  env::EncodedHistory history_;
  Rng noise_rng_{0};
  std::vector<LiveEvent> events_;
  bool started_ = false;
  bool done_ = false;
};

using PolicyFactory = std::function<std::unique_ptr<eval::Policy>()>;

struct ServiceConfig {
  std::chrono::seconds ttl{1800};
  int max_turns = 50;
};

struct SessionStart {
  std::string id;
  std::string greeting;
  std::vector<std::string> suggestions;
};

/// Concurrent live dialogs keyed by id. Requests on one session are
/// serialized; policies are built per session from shared read-only models.
class SessionService {
 public:
  using Clock = std::chrono::steady_clock;

  SessionService(std::shared_ptr<const env::ObservationBuilder> builder, std::map<std::string, PolicyFactory> policies,
                 ServiceConfig config = {}, std::uint64_t seed = 0);

  /// Throws UnknownPolicy.
  SessionStart create(const std::string& policy);
  /// Throws UnknownSession, SessionClosed and EmptyMessage.
  ReplyBundle message(const std::string& id, const std::string& text);
  std::string trace_json(const std::string& id);
  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t expire(Clock::time_point now = Clock::now());

  std::vector<std::string> policies() const;
  std::size_t size() const;
  const graph::DialogTree& tree() const { return builder_->tree(); }

 private:
  struct Entry {
    std::mutex mutex;
    LiveDialog dialog;
    std::string policy;
    Clock::time_point created;
    Clock::time_point last_active;

    Entry(LiveDialog d, std::string p) : dialog(std::move(d)), policy(std::move(p)) {}
  };

  std::shared_ptr<Entry> find(const std::string& id);

  std::shared_ptr<const env::ObservationBuilder> builder_;
  std::map<std::string, PolicyFactory> policies_;
  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  Rng id_rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace cts::service
