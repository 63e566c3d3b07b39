#include "biascope/iat_server.hpp"

#include "httplib.h"

namespace biascope::iat {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

// Maps toolkit exceptions to HTTP status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, e.what());
  } catch (const ValidationError& e) {
    send_error(res, 400, e.what());
  } catch (const Json::exception& e) {
    send_error(res, 400, std::string("malformed request: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

Json parse_body(const httplib::Request& req) {
  auto body = Json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw ValidationError("request body must be a JSON object");
  }
  return body;
}

}  // namespace

HttpServer::HttpServer(StudyService& service, std::optional<std::filesystem::path> ui_dir)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  install_routes();
  if (ui_dir) {
    if (!server_->set_mount_point("/", ui_dir->string())) {
      throw IoError("UI directory not found: " + ui_dir->string());
    }
  }
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  server_->Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      const auto& p = body.at("participant");
      Participant participant{p.at("region").get<std::string>(), p.at("gender").get<std::string>(),
                              p.at("id").get<std::string>()};
      std::optional<std::uint64_t> seed;
      if (auto it = body.find("seed"); it != body.end() && !it->is_null()) {
        seed = it->get<std::uint64_t>();
      }
      const auto info = service_.create_session(participant, seed);
      send_json(res, 201,
                {{"session_id", info.session_id},
                 {"block_order", to_string(info.block_order)},
                 {"left_caption", info.left_caption},
                 {"right_caption", info.right_caption}});
    });
  });

  server_->Get(R"(/sessions/([0-9a-f]+)/next)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send_json(res, 200, to_json(service_.next_trial(req.matches[1]))); });
               });

  server_->Post(R"(/sessions/([0-9a-f]+)/responses)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    const auto body = parse_body(req);
                    const auto key = parse_key(body.at("pressed_key").get<std::string>());
                    if (!key) {
                      throw ValidationError("pressed_key must be 'left' or 'right'");
                    }
                    const auto status = service_.submit_response(
                        req.matches[1], body.at("trial_id").get<std::string>(), *key,
                        body.at("rt_ms").get<std::int64_t>());
                    send_json(res, 200, {{"status", to_string(status)}});
                  });
                });

  server_->Post(R"(/sessions/([0-9a-f]+)/finish)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    Json results = Json::array();
                    for (const auto& r : service_.finish(req.matches[1])) {
                      results.push_back(r.to_json());
                    }
                    send_json(res, 200, {{"results", results}});
                  });
                });

  server_->Get("/aggregate", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("region")) {
        throw ValidationError("missing region parameter");
      }
      const auto region = req.get_param_value("region");
      send_json(res, 200, {{"region", region}, {"pairs", to_json(service_.aggregate(region))}});
    });
  });
}

int HttpServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

bool HttpServer::listen_after_bind() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) {
    server_->stop();
  }
}

bool HttpServer::is_running() const { return server_->is_running(); }

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace biascope::iat
