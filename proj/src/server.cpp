#include "qanno/server.hpp"

#include <httplib.h>

#include <iostream>

#include "qanno/error.hpp"
#include "qanno/json_util.hpp"

namespace qanno {

using nlohmann::json;

json error_body(const std::string& code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Maps engine exceptions onto HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const SessionNotFound& e) {
    send(res, 404, error_body("not_found", e.what()));
  } catch (const QuestionConflict& e) {
    json body = error_body("conflict", e.what());
    body["question"] = e.outstanding;
    send(res, 409, body);
  } catch (const json::parse_error& e) {
    send(res, 400, error_body("bad_request", std::string("malformed JSON body: ") + e.what()));
  } catch (const ParseError& e) {
    send(res, 422, error_body("validation", e.what()));
  } catch (const RangeError& e) {
    send(res, 422, error_body("validation", e.what()));
  } catch (const CapacityError& e) {
    send(res, 422, error_body("validation", e.what()));
  } catch (const std::invalid_argument& e) {
    send(res, 422, error_body("validation", e.what()));
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    send(res, 500, error_body("internal", e.what()));
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

}  // namespace

void install_routes(httplib::Server& server, SessionStore& store) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Max-Age", "600"}});

  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"ok", true}}); });

  server.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = store.create(parse_body(req));
      send(res, 201, json{{"id", id}, {"session", store.get(id)->describe()}});
    });
  });

  server.Get(R"(/sessions/([^/]+))", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, store.get(req.matches[1])->describe()); });
  });

  server.Get(R"(/sessions/([^/]+)/question)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, store.get(req.matches[1])->next_question()); });
  });

  server.Post(R"(/sessions/([^/]+)/answer)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto session = store.get(req.matches[1]);
      const json body = parse_body(req);
      if (!body.is_object()) throw ParseError("body must be an object {\"question_id\", \"correct\"}");
      if (!body.contains("question_id") || !is_non_negative_integer(body.at("question_id"))) {
        throw ParseError("question_id: expected a non-negative integer");
      }
      if (!body.contains("correct") || !body.at("correct").is_boolean()) {
        throw ParseError("correct: expected a boolean");
      }
      send(res, 200, session->answer(body.at("question_id").get<std::uint64_t>(), body.at("correct").get<bool>()));
    });
  });

  server.Get(R"(/sessions/([^/]+)/metrics)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto session = store.get(req.matches[1]);
      std::optional<std::size_t> target;
      if (req.has_param("target_l")) {
        const std::string raw = req.get_param_value("target_l");
        if (raw.empty() || raw.find_first_not_of("0123456789") != std::string::npos || std::stoull(raw) == 0) {
          throw ParseError("target_l: expected a positive integer");
        }
        target = std::stoull(raw);
      }
      send(res, 200, session->metrics(target));
    });
  });
}

bool serve(SessionStore& store, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, store);
  std::cerr << "serving sessions from " << store.root() << " on http://" << host << ":" << port << "\n";
  return server.listen(host, port);
}

}  // namespace qanno
