#include "dppo/steer/server.hpp"

#include "dppo/steer/websocket.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#ifndef DPPO_VERSION
#define DPPO_VERSION "unknown"
#endif

namespace dppo::steer {

namespace {

constexpr std::size_t kMaxHeader = 16 * 1024;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;  // lower-case keys
};

Request parse_request(const std::string& head) {
  Request req;
  std::istringstream in(head);
  std::string line;
  std::getline(in, line);
  std::istringstream first(line);
  first >> req.method >> req.path;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    req.headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  return req;
}

std::string http_response(int status, const char* reason, const std::string& type, const std::string& body) {
  std::ostringstream out;
  out << "HTTP/1.1 " << status << ' ' << reason << "\r\n"
      << "Content-Type: " << type << "\r\n"
      << "Content-Length: " << body.size() << "\r\n"
      << "Cache-Control: no-store\r\n"
      << "Connection: close\r\n\r\n"
      << body;
  return out.str();
}

std::string content_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

struct Server::Client {
  int fd = -1;
  std::mutex send_mutex;
  std::atomic<bool> websocket{false};
  std::atomic<bool> open{true};
  std::atomic<bool> finished{false};
  std::thread thread;

  bool send_all(std::string_view data) {
    std::lock_guard lock(send_mutex);
    if (!open) return false;
    while (!data.empty()) {
      const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        open = false;
        return false;
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  /// Appends received bytes to `buffer`; false on close or error. Polls so a
  /// stopping server is noticed.
  bool receive(std::string& buffer, const std::atomic<bool>& stopping) {
    char chunk[4096];
    while (!stopping && open) {
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, 100);
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) return false;
      if (r == 0) continue;
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      buffer.append(chunk, static_cast<std::size_t>(n));
      return true;
    }
    return false;
  }
};

Server::Server(Session& session, ServerOptions options) : session_(session), options_(std::move(options)) {
  if (!(options_.tick_hz > 0.0) || options_.tick_hz > 1000.0) {
    throw std::invalid_argument("tick rate must lie in (0, 1000] Hz");
  }
}

Server::~Server() {
  stopping_ = true;
  shutdown_all();
}

void Server::bind() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  const std::string where = options_.host + ":" + std::to_string(options_.port);
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
    throw std::runtime_error("invalid listen address '" + options_.host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
    const std::string reason = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on " + where + ": " + reason);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

std::optional<std::string> Server::run() {
  if (listen_fd_ < 0) bind();
  accept_thread_ = std::thread([this] { accept_loop(); });

  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto period = std::chrono::duration<double>(1.0 / options_.tick_hz);
  std::uint64_t k = 0;
  std::optional<std::string> failure;
  while (!stopping_) {
    ++k;
    const auto due = t0 + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(k));
    // Sleep in short slices so stop() is honoured promptly.
    while (!stopping_ && clock::now() < due) {
      std::this_thread::sleep_for(std::min<clock::duration>(due - clock::now(), std::chrono::milliseconds(50)));
    }
    if (stopping_) break;
    if (auto msg = session_.tick(seconds_since(t0))) broadcast(msg->dump());
    if (session_.fatal_error()) {
      failure = session_.fatal_error();
      break;
    }
  }
  stopping_ = true;
  shutdown_all();
  return failure;
}

void Server::shutdown_all() {
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::vector<std::shared_ptr<Client>> clients;
  {
    std::lock_guard lock(clients_mutex_);
    clients.swap(clients_);
  }
  for (auto& c : clients) {
    if (c->websocket && c->open) c->send_all(ws::encode_frame(ws::close, std::string("\x03\xe9", 2)));
    ::shutdown(c->fd, SHUT_RDWR);
  }
  for (auto& c : clients) {
    if (c->thread.joinable()) c->thread.join();
    ::close(c->fd);
  }
}

void Server::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, 100);
    if (r <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    auto client = std::make_shared<Client>();
    client->fd = fd;
    std::lock_guard lock(clients_mutex_);
    // Reap finished connections.
    for (auto it = clients_.begin(); it != clients_.end();) {
      if ((*it)->finished) {
        (*it)->thread.join();
        ::close((*it)->fd);
        it = clients_.erase(it);
      } else {
        ++it;
      }
    }
    client->thread = std::thread([this, client] { serve_client(client); });
    clients_.push_back(client);
  }
}

void Server::serve_client(std::shared_ptr<Client> client) {
  std::string buffer;
  std::size_t head_end = std::string::npos;
  while ((head_end = buffer.find("\r\n\r\n")) == std::string::npos) {
    if (buffer.size() > kMaxHeader || !client->receive(buffer, stopping_)) {
      client->finished = true;
      return;
    }
  }
  const Request req = parse_request(buffer.substr(0, head_end));
  buffer.erase(0, head_end + 4);

  const auto header = [&](const char* key) {
    const auto it = req.headers.find(key);
    return it == req.headers.end() ? std::string() : it->second;
  };
  if (lower(header("upgrade")) == "websocket") {
    const std::string key = header("sec-websocket-key");
    if (req.method != "GET" || key.empty()) {
      client->send_all(http_response(400, "Bad Request", "text/plain", "bad websocket handshake\n"));
    } else {
      client->send_all("HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                       "Sec-WebSocket-Accept: " + ws::accept_key(key) + "\r\n\r\n");
      client->websocket = true;
      client->send_all(ws::encode_frame(ws::text, session_.hello().dump()));
      handle_websocket(client, std::move(buffer));
    }
    client->finished = true;
    return;
  }

  std::string path = req.path.substr(0, req.path.find('?'));
  if (req.method != "GET") {
    client->send_all(http_response(405, "Method Not Allowed", "text/plain", "only GET is supported\n"));
  } else if (path == "/health") {
    client->send_all(http_response(200, "OK", "application/json",
                                   nlohmann::json{{"status", "ok"}, {"version", DPPO_VERSION}}.dump() + "\n"));
  } else if (!options_.ui_dir) {
    if (path == "/" || path == "/index.html") {
      client->send_all(http_response(200, "OK", "text/html; charset=utf-8", std::string(builtin_index_html())));
    } else {
      client->send_all(http_response(404, "Not Found", "text/plain", "not found\n"));
    }
  } else {
    if (path == "/") path = "/index.html";
    const std::filesystem::path rel = std::filesystem::path(path).relative_path().lexically_normal();
    const bool escapes = rel.empty() || *rel.begin() == "..";
    std::ifstream in(*options_.ui_dir / rel, std::ios::binary);
    if (escapes || !in) {
      client->send_all(http_response(404, "Not Found", "text/plain", "not found\n"));
    } else {
      std::ostringstream body;
      body << in.rdbuf();
      client->send_all(http_response(200, "OK", content_type(rel), body.str()));
    }
  }
  ::shutdown(client->fd, SHUT_WR);
  client->finished = true;
}

void Server::handle_websocket(const std::shared_ptr<Client>& client, std::string buffer) {
  std::string message;
  bool in_message = false;
  for (;;) {
    std::optional<ws::Frame> frame;
    try {
      frame = ws::decode_frame(buffer);
    } catch (const std::runtime_error& e) {
      client->send_all(ws::encode_frame(ws::close, std::string("\x03\xea", 2) + e.what()));
      client->open = false;
      return;
    }
    if (!frame) {
      if (!client->receive(buffer, stopping_)) return;
      continue;
    }
    switch (frame->opcode) {
      case ws::ping: client->send_all(ws::encode_frame(ws::pong, frame->payload)); break;
      case ws::pong: break;
      case ws::close:
        client->send_all(ws::encode_frame(ws::close, frame->payload.substr(0, 2)));
        client->open = false;
        return;
      case ws::text:
      case ws::binary:
      case ws::continuation: {
        if (frame->opcode != ws::continuation) {
          message = frame->payload;
          in_message = frame->opcode == ws::text;
          if (!in_message) {
            client->send_all(ws::encode_frame(
                ws::text, nlohmann::json{{"type", "error"}, {"message", "binary frames are not supported"}}.dump()));
          }
        } else {
          message += frame->payload;
        }
        if (frame->fin && in_message) {
          client->send_all(ws::encode_frame(ws::text, session_.handle_client_text(message).dump()));
          message.clear();
          in_message = false;
        }
        break;
      }
      default:
        client->send_all(ws::encode_frame(ws::close, std::string("\x03\xea", 2)));
        client->open = false;
        return;
    }
  }
}

void Server::broadcast(const std::string& text) {
  const std::string frame = ws::encode_frame(ws::text, text);
  std::vector<std::shared_ptr<Client>> targets;
  {
    std::lock_guard lock(clients_mutex_);
    for (const auto& c : clients_) {
      if (c->websocket && c->open) targets.push_back(c);
    }
  }
  for (const auto& c : targets) c->send_all(frame);
}

std::string_view builtin_index_html() {
  return R"(<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>dppo steer</title>
<style>body{font-family:sans-serif;margin:2em}pre{background:#f4f4f4;padding:1em}</style></head>
<body>
<h1>Risk steering</h1>
<p>beta <input id="beta" type="range" step="0.01"> <span id="bv"></span>
<button data-t="reset">reset</button> <button data-t="pause">pause</button> <button data-t="resume">resume</button></p>
<pre id="state">connecting...</pre>
<script>
const ws = new WebSocket(`ws://${location.host}/ws`);
const slider = document.getElementById('beta');
ws.onmessage = (ev) => {
  const m = JSON.parse(ev.data);
  if (m.type === 'hello') { slider.min = m.beta_bounds[0]; slider.max = m.beta_bounds[1]; slider.value = m.beta; }
  if (m.type === 'state') { document.getElementById('state').textContent = JSON.stringify(m, null, 1); }
};
slider.oninput = () => {
  document.getElementById('bv').textContent = slider.value;
  ws.send(JSON.stringify({type: 'set_risk', beta: Number(slider.value)}));
};
for (const b of document.querySelectorAll('button')) b.onclick = () => ws.send(JSON.stringify({type: b.dataset.t}));
</script>
</body>
</html>
)";
}

}  // namespace dppo::steer
