#include "cts/service/http.hpp"

#include "cts/graph/tree_io.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cts::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}}.dump());
}

/// Parses a JSON object body; an empty body is an empty object.
json body_object(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("request body is not a JSON object");
  return j;
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const UnknownSession& e) {
    send_error(res, 404, e.what());
  } catch (const SessionClosed& e) {
    send_error(res, 409, e.what());
  } catch (const EmptyMessage& e) {
    send_error(res, 400, e.what());
  } catch (const UnknownPolicy& e) {
    send_error(res, 400, e.what());
  } catch (const ParseError& e) {
    send_error(res, 400, e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

}  // namespace

void install_routes(httplib::Server& server, SessionService& service, const HttpConfig& config) {
  server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json{{"status", "ok"}}.dump());
  });
  server.Get("/tree", [&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, graph::serialize_tree(service.tree()));
  });
  server.Get("/config", [&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json{{"policies", service.policies()}}.dump());
  });
  server.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      service.expire();
      const auto body = body_object(req);
      const auto policies = service.policies();
      std::string policy = body.value("policy", std::string{});
      if (policy.empty() && !policies.empty()) policy = policies.front();
      const auto s = service.create(policy);
      send_json(res, 200, json{{"id", s.id}, {"greeting", s.greeting}, {"suggestions", s.suggestions}}.dump());
    });
  });
  server.Post(R"(/sessions/([^/]+)/message)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = body_object(req);
      const auto it = body.find("text");
      if (it != body.end() && !it->is_string()) throw ParseError("'text' must be a string");
      const std::string text = it == body.end() ? std::string{} : it->get<std::string>();
      send_json(res, 200, reply_json(service.message(req.matches[1], text)));
    });
  });
  server.Get(R"(/sessions/([^/]+)/trace)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service.trace_json(req.matches[1])); });
  });
}

bool serve(SessionService& service, const HttpConfig& config) {
  httplib::Server server;
  install_routes(server, service, config);
  return server.listen(config.host, config.port);
}

}  // namespace cts::service
