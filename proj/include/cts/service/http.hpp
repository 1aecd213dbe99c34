#pragma once

#include <string>

#include "cts/service/session.hpp"

namespace httplib {
class Server;
}

namespace cts::service {

struct HttpConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string cors_origin = "*";
};

/// Installs the session routes on `server`:
///   POST /sessions {policy}            -> {id, greeting, suggestions}
///   POST /sessions/{id}/message {text} -> reply bundle
///   GET  /sessions/{id}/trace, GET /tree, GET /config, GET /healthz
/// Errors are {"error": message} with 400, 404 or 409.
void install_routes(httplib::Server& server, SessionService& service, const HttpConfig& config);

/// Serves until the process is stopped. Returns false if the port cannot be bound.
bool serve(SessionService& service, const HttpConfig& config);

}  // namespace cts::service
