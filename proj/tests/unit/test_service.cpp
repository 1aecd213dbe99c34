#include <deque>
#include <queue>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"

#include "cts/baseline/baseline.hpp"
#include "cts/graph/logic.hpp"
#include "cts/graph/tree_io.hpp"
#include "cts/service/http.hpp"
#include "cts/service/session.hpp"

using namespace cts;
using namespace cts::service;
using nlohmann::json;

namespace {

/// Plays a fixed list of (action, mode) decisions, then ASKs forever.
class ScriptedPolicy final : public eval::Policy {
 public:
  explicit ScriptedPolicy(std::deque<std::size_t> actions, sim::DialogMode mode = sim::DialogMode::Guided)
      : actions_(std::move(actions)), mode_(mode) {}
  std::string name() const override { return "scripted"; }
  std::size_t act(const env::Observation&, const std::vector<env::ActionInput>&) override {
    if (actions_.empty()) return 0;
    const auto a = actions_.front();
    actions_.pop_front();
    return a;
  }
  std::optional<sim::DialogMode> predict_mode(const env::Observation&) override { return mode_; }

 private:
  std::deque<std::size_t> actions_;
  sim::DialogMode mode_;
};

struct Fixture {
  env::World world = test::fixture_world("six_node.json", 64);
  std::shared_ptr<const env::ObservationBuilder> builder =
      std::make_shared<env::ObservationBuilder>(world.tree, world.encoder);
  baseline::ModeClassifier classifier = baseline::ModeClassifier::train(world, env::EnvConfig{}, {});

  std::unique_ptr<eval::Policy> baseline() const {
    return std::make_unique<baseline::BaselinePolicy>(world.tree, world.encoder, classifier);
  }
  const graph::DialogTree& tree() const { return *world.tree; }
  std::size_t id(const std::string& node) const { return tree().index_of(node); }
};

/// Shortest chain of node ids from start to `goal`, Logic nodes passable
/// along any branch; excludes the goal.
std::vector<std::string> bfs_chain(const graph::DialogTree& tree, std::size_t goal) {
  std::vector<long> parent(tree.size(), -1);
  std::queue<std::size_t> q;
  q.push(tree.start());
  parent[tree.start()] = static_cast<long>(tree.start());
  while (!q.empty()) {
    const auto v = q.front();
    q.pop();
    for (const auto& e : tree.node(v).answers)
      if (parent[e.target_index] < 0) {
        parent[e.target_index] = static_cast<long>(v);
        q.push(e.target_index);
      }
  }
  std::vector<std::string> chain;
  for (auto v = goal; v != tree.start();) {
    v = static_cast<std::size_t>(parent[v]);
    if (tree.node(v).kind != graph::NodeKind::Logic) chain.insert(chain.begin(), tree.node(v).id);
  }
  return chain;
}

}  // namespace

TEST_CASE("an FAQ question is answered by a direct skip chain") {
  Fixture f;
  LiveDialog d(f.builder, f.baseline());
  CHECK(d.greeting() == f.tree().node(f.tree().start()).text);
  CHECK(d.suggestions() == std::vector<std::string>{"my business trip"});
  const auto r = d.send("where do I book a hotel");
  REQUIRE(r.asked_node_texts.size() == 1);
  CHECK(r.asked_node_texts[0] == f.tree().node(f.id("hotel")).text);
  CHECK(r.skip_trace.size() >= 1);
  CHECK(r.skip_trace == bfs_chain(f.tree(), f.id("hotel")));
  CHECK(r.mode_prediction == sim::DialogMode::Free);
  CHECK(r.done);
  CHECK(r.suggestions.empty());
  CHECK_THROWS_AS(d.send("thanks"), SessionClosed);
}

TEST_CASE("variable answers fill the beliefstate and logic nodes resolve") {
  Fixture f;
  // SKIP start, SKIP topic -> duration, ASK duration; then SKIP, ASK per_diem.
  LiveDialog d(f.builder, std::make_unique<ScriptedPolicy>(std::deque<std::size_t>{1, 1, 0, 1, 0}));
  auto r = d.send("business trip reimbursement");
  CHECK(r.asked_node_texts == std::vector<std::string>{f.tree().node(f.id("duration")).text});
  CHECK(r.skip_trace == std::vector<std::string>{"start", "topic"});
  CHECK(r.suggestions == std::vector<std::string>{"3 days"});
  CHECK_FALSE(r.done);
  CHECK_THROWS_AS(d.send("   "), EmptyMessage);
  r = d.send("it took 3 days");
  CHECK(std::get<double>(d.state().beliefstate.at("trip_length")) == 3 * 86400.0);
  CHECK(r.asked_node_texts == std::vector<std::string>{f.tree().node(f.id("per_diem")).text});
  CHECK(r.skip_trace == std::vector<std::string>{"duration"});
  CHECK(r.done);  // leaf Information node
}

TEST_CASE("back-to-back information ASKs stay in one reply") {
  // A guided dialog at an Information node with answers keeps going.
  graph::DialogTree tree = graph::parse_tree(R"({"start": "s", "nodes": [
    {"id": "s", "kind": "start", "text": "hi", "answers": [{"id": "a", "text": "go", "target": "i1"}]},
    {"id": "i1", "kind": "information", "text": "first", "faq": ["q"],
     "answers": [{"id": "b", "text": "more", "target": "d"}]},
    {"id": "d", "kind": "dialog", "text": "which?", "answers": [{"id": "c", "text": "x", "target": "i2"}]},
    {"id": "i2", "kind": "information", "text": "second", "faq": ["r"]}]})");
  auto t = std::make_shared<graph::DialogTree>(tree);
  auto builder = std::make_shared<env::ObservationBuilder>(t, std::make_shared<text::HashedNgramEncoder>(16));
  LiveDialog d(builder, std::make_unique<ScriptedPolicy>(std::deque<std::size_t>{1, 0, 1, 0, 1, 0}));
  const auto r = d.send("go");
  CHECK(r.asked_node_texts == std::vector<std::string>{"first", "which?"});
  CHECK(r.skip_trace == std::vector<std::string>{"s", "i1"});
  const auto r2 = d.send("x");
  CHECK(r2.asked_node_texts == std::vector<std::string>{"second"});
  CHECK(r2.done);
}

TEST_CASE("turn limit ends a dialog") {
  Fixture f;
  LiveDialog d(f.builder, std::make_unique<ScriptedPolicy>(std::deque<std::size_t>{}), 3);
  CHECK_FALSE(d.send("hello").done);
  CHECK_FALSE(d.send("hello").done);
  CHECK(d.send("hello").done);
}

namespace {

/// Re-runs a finished live dialog offline: the recorded user messages are
/// fed to a fresh policy through a separately written loop. Returns the
/// (node, action, edge, landed) sequence.
std::vector<std::tuple<std::string, std::string, long, std::string>> offline_replay(
    const Fixture& f, const std::vector<LiveEvent>& events) {
  const auto& tree = f.tree();
  auto policy = f.baseline();
  policy->begin_dialog(nullptr);
  sim::DialogState s;
  env::EncodedHistory h;
  Rng rng(0);
  std::vector<std::tuple<std::string, std::string, long, std::string>> out;
  bool first = true;
  for (std::size_t k = 0; k < events.size(); ++k) {
    if (!events[k].user) continue;
    const auto& text = events[k].text;
    if (first) {
      s = sim::DialogState::begin(tree, text);
      first = false;
    } else {
      const auto& n = tree.node(s.node);
      if (n.kind == graph::NodeKind::Variable && s.last_action == graph::ActionKind::Ask)
        if (auto v = graph::parse_value(*n.variable, text)) s.beliefstate[n.variable->name] = *v;
      s.hear(text);
    }
    // As many system actions as the live dialog took before the next message.
    std::size_t actions = 0;
    for (auto j = k + 1; j < events.size() && !events[j].user; ++j) ++actions;
    for (std::size_t a = 0; a < actions; ++a) {
      h.sync(s, f.builder->encoder(), 0.0, false, rng);
      const auto obs = f.builder->observe(s, h, sim::DialogMode::Guided);
      const auto choice = policy->act(obs, f.builder->candidates(s.node));
      const auto from = tree.node(s.node).id;
      if (choice == 0) {
        s.ask(tree);
        out.emplace_back(from, "ask", -1, from);
      } else {
        const auto& edge = tree.node(s.node).answers.at(choice - 1);
        // The landing is recomputed from the edge and the logic rules.
        std::size_t land = edge.target_index;
        while (tree.node(land).kind == graph::NodeKind::Logic) {
          const auto& logic = tree.node(land);
          land = logic.answers[graph::select_logic_edge_lenient(logic, s.beliefstate)].target_index;
        }
        s.skip(tree, choice - 1);
        CHECK(s.node == land);
        out.emplace_back(from, "skip", static_cast<long>(choice - 1), tree.node(land).id);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("served dialogs replay to the same actions") {
  Fixture f;
  Rng rng(11);
  const std::vector<std::string> phrases{"my business trip", "reimbursement", "hotel booking", "3 days", "5 weeks",
                                         "where do I book a hotel", "how much daily allowance do I get",
                                         "what", "yes"};
  for (int trial = 0; trial < 40; ++trial) {
    LiveDialog d(f.builder, f.baseline(), 12);
    while (!d.done()) d.send(rng.pick(std::span<const std::string>(phrases)));
    std::vector<std::tuple<std::string, std::string, long, std::string>> live;
    int waiting_asks = 0;
    for (const auto& ev : d.events()) {
      if (ev.user) {
        CHECK(waiting_asks <= 1);
        waiting_asks = 0;
        continue;
      }
      live.emplace_back(ev.node, graph::to_string(ev.action), ev.edge ? static_cast<long>(*ev.edge) : -1, ev.landed);
      const auto kind = f.tree().node(f.tree().index_of(ev.node)).kind;
      if (ev.action == graph::ActionKind::Ask && kind != graph::NodeKind::Information) ++waiting_asks;
    }
    CHECK(waiting_asks <= 1);
    CHECK(offline_replay(f, d.events()) == live);
    const auto trace = json::parse(d.trace_json());
    CHECK(trace["events"].size() == d.events().size());
    CHECK(trace["done"] == true);
  }
}

TEST_CASE("session service errors, expiry and concurrency") {
  Fixture f;
  std::map<std::string, PolicyFactory> policies{{"baseline", [&] { return f.baseline(); }}};
  ServiceConfig cfg;
  cfg.ttl = std::chrono::seconds(60);
  SessionService svc(f.builder, policies, cfg, 5);
  CHECK_THROWS_AS(svc.create("agent"), UnknownPolicy);
  const auto a = svc.create("baseline");
  const auto b = svc.create("baseline");
  CHECK(a.id != b.id);
  CHECK(a.greeting == f.tree().node(f.tree().start()).text);
  CHECK_THROWS_AS(svc.message("nope", "hi"), UnknownSession);
  CHECK_THROWS_AS(svc.message(a.id, ""), EmptyMessage);
  CHECK(svc.message(a.id, "where do I book a hotel").done);
  CHECK_THROWS_AS(svc.message(a.id, "again"), SessionClosed);
  CHECK(svc.expire(SessionService::Clock::now()) == 0);
  CHECK(svc.expire(SessionService::Clock::now() + std::chrono::seconds(61)) == 2);
  CHECK(svc.size() == 0);

  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) ids.push_back(svc.create("baseline").id);
  std::vector<std::thread> workers;
  std::atomic<int> replies{0};
  for (int w = 0; w < 4; ++w)
    workers.emplace_back([&, w] {
      for (int round = 0; round < 5; ++round)
        for (const auto& id : ids) {
          try {
            svc.message(id, w % 2 ? "my business trip" : "reimbursement");
            ++replies;
          } catch (const SessionClosed&) {
          }
        }
    });
  for (auto& t : workers) t.join();
  CHECK(replies > 0);
  for (const auto& id : ids) {
    const auto trace = json::parse(svc.trace_json(id));
    CHECK(trace["events"].front().contains("user"));
  }
}

TEST_CASE("http routes") {
  Fixture f;
  std::map<std::string, PolicyFactory> policies{{"baseline", [&] { return f.baseline(); }}};
  SessionService svc(f.builder, policies);
  httplib::Server server;
  HttpConfig cfg;
  cfg.cors_origin = "http://localhost:5173";
  install_routes(server, svc, cfg);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

  auto tree = cli.Get("/tree");
  REQUIRE(tree);
  CHECK(graph::parse_tree(tree->body) == f.tree());

  auto created = cli.Post("/sessions", R"({"policy": "baseline"})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 200);
  const auto s = json::parse(created->body);
  const std::string id = s["id"];
  CHECK(s["greeting"] == f.tree().node(f.tree().start()).text);
  CHECK(s["suggestions"] == json::array({"my business trip"}));

  auto empty = cli.Post("/sessions/" + id + "/message", R"({"text": ""})", "application/json");
  CHECK(empty->status == 400);
  auto bad = cli.Post("/sessions/" + id + "/message", "{not json", "application/json");
  CHECK(bad->status == 400);
  auto reply = cli.Post("/sessions/" + id + "/message", R"({"text": "where do I book a hotel"})", "application/json");
  REQUIRE(reply);
  CHECK(reply->status == 200);
  const auto r = json::parse(reply->body);
  CHECK(r["asked_node_texts"] == json::array({f.tree().node(f.id("hotel")).text}));
  CHECK(r["skip_trace"] == json::array({"start", "topic"}));
  CHECK(r["mode_prediction"] == "free");
  CHECK(r["done"] == true);
  CHECK(r["suggestions"] == json::array());

  CHECK(cli.Post("/sessions/" + id + "/message", R"({"text": "more"})", "application/json")->status == 409);
  CHECK(cli.Post("/sessions/unknown/message", R"({"text": "hi"})", "application/json")->status == 404);
  CHECK(cli.Get("/sessions/unknown/trace")->status == 404);
  CHECK(cli.Post("/sessions", R"({"policy": "agent"})", "application/json")->status == 400);

  auto trace = cli.Get("/sessions/" + id + "/trace");
  REQUIRE(trace);
  const auto t = json::parse(trace->body);
  CHECK(t["policy"] == "baseline");
  CHECK(t["done"] == true);
  CHECK(t["events"].size() == 4);  // message, two skips, one ask

  auto options = cli.Options("/sessions");
  REQUIRE(options);
  CHECK(options->status == 204);
  CHECK(options->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  server.stop();
  loop.join();
}
