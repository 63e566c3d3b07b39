#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "biascope/iat.hpp"

namespace httplib {
class Server;
}

namespace biascope::iat {

// HTTP+JSON front end for a StudyService:
//   POST /sessions                 {participant:{region,gender,id}, seed?}
//   GET  /sessions/{id}/next
//   POST /sessions/{id}/responses  {trial_id, pressed_key, rt_ms}
//   POST /sessions/{id}/finish
//   GET  /aggregate?region=...
// plus static files from ui_dir at "/" when given.
class HttpServer {
 public:
  HttpServer(StudyService& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds to an OS-chosen port and returns it.
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen_after_bind();
  void stop();
  bool is_running() const;
  void wait_until_ready() const;

 private:
  void install_routes();

  StudyService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace biascope::iat
