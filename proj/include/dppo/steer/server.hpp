#pragma once

#include "dppo/steer/session.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace dppo::steer {

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  double tick_hz = 10.0;
  /// Directory served for GET requests other than /health; a built-in page
  /// is served for / when unset.
  std::optional<std::filesystem::path> ui_dir;
};

/// HTTP + WebSocket front end for one Session. `run` owns the tick loop; each
/// connection gets its own reader thread that only talks to the mailbox.
class Server {
 public:
  Server(Session& session, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and listens. Throws std::runtime_error naming the address on failure.
  void bind();
  std::uint16_t port() const { return port_; }

  /// Ticks until `stop()` or a fatal session error; returns that error if any.
  std::optional<std::string> run();
  /// Safe to call from any thread.
  void stop() { stopping_ = true; }

 private:
  struct Client;

  void accept_loop();
  void serve_client(std::shared_ptr<Client> client);
  void handle_websocket(const std::shared_ptr<Client>& client, std::string buffer);
  void broadcast(const std::string& text);
  void shutdown_all();

  Session& session_;
  ServerOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex clients_mutex_;
  std::vector<std::shared_ptr<Client>> clients_;
  std::thread accept_thread_;
};

/// Built-in operator page served for GET / without a UI directory.
std::string_view builtin_index_html();

}  // namespace dppo::steer
