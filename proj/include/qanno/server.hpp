#pragma once

#include <string>

#include <json.hpp>

#include "qanno/session.hpp"

namespace httplib {
class Server;
}

namespace qanno {

/// Registers the session API on `server`:
///   POST /sessions                  -> 201 {"id", "session"}
///   GET  /sessions/{id}             -> session document
///   GET  /sessions/{id}/question    -> next question or completion
///   POST /sessions/{id}/answer      -> answer response; body {"question_id", "correct"}
///   GET  /sessions/{id}/metrics     -> curve and summary; optional ?target_l=
///   GET  /health
/// Errors are {"error": {"code", "message"}} with status 400 (malformed
/// body), 404, 409 (conflict; carries "question") or 422. Every response
/// carries permissive CORS headers and OPTIONS preflights succeed.
void install_routes(httplib::Server& server, SessionStore& store);

/// Blocks serving on host:port until the process is stopped.
/// Returns false when the socket cannot be bound.
bool serve(SessionStore& store, const std::string& host, int port);

/// Structured error body shared by every failure response.
nlohmann::json error_body(const std::string& code, const std::string& message);

}  // namespace qanno
