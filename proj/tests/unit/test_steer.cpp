#include "dppo/io/checkpoint.hpp"
#include "dppo/steer/server.hpp"
#include "dppo/steer/session.hpp"
#include "dppo/steer/websocket.hpp"

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <random>
#include <thread>

using namespace dppo;
using nlohmann::json;

namespace {

io::Checkpoint make_checkpoint(RiskKind metric = RiskKind::wang, algo::Algorithm algo = algo::Algorithm::dppo,
                               int atoms = 16) {
  io::Checkpoint c;
  c.config.metric = metric;
  c.config.num_atoms = atoms;
  c.config.hidden_sizes = {8};
  c.algorithm = algo;
  c.env_name = "risky-cliff";
  std::mt19937_64 rng(3);
  c.agent = algo::Agent::initialise(3, 2, c.config, algo, rng);
  // Push the actor forward so episodes end quickly.
  c.agent.actor.layers().back().bias << 1.0, 0.0;
  return c;
}

// Independent Wang read-out: quantile by bisection on erfc, no shared code.
double reference_wang_value(std::vector<double> atoms, double beta) {
  std::sort(atoms.begin(), atoms.end());
  const auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  const auto quantile = [&](double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  const auto g = [&](double tau) {
    if (tau <= 0.0) return 0.0;
    if (tau >= 1.0) return 1.0;
    return cdf(quantile(tau) + beta);
  };
  const double n = static_cast<double>(atoms.size());
  double v = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) v += (g((k + 1) / n) - g(k / n)) * atoms[k];
  return v;
}

class TestClient {
 public:
  explicit TestClient(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw std::runtime_error("connect failed");
    timeval tv{5, 0};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }
  ~TestClient() { ::close(fd_); }

  void send_raw(const std::string& s) {
    std::size_t off = 0;
    while (off < s.size()) {
      const ssize_t n = ::send(fd_, s.data() + off, s.size() - off, MSG_NOSIGNAL);
      if (n <= 0) throw std::runtime_error("send failed");
      off += static_cast<std::size_t>(n);
    }
  }
  bool fill() {
    char buf[4096];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n <= 0) return false;
    buffer_.append(buf, static_cast<std::size_t>(n));
    return true;
  }
  std::string read_http() {
    while (buffer_.find("\r\n\r\n") == std::string::npos) {
      if (!fill()) break;
    }
    // Responses other than the upgrade close the connection after the body.
    if (buffer_.find("101 Switching") == std::string::npos) {
      while (fill()) {
      }
      std::string all = std::move(buffer_);
      buffer_.clear();
      return all;
    }
    const std::size_t end = buffer_.find("\r\n\r\n") + 4;
    std::string head = buffer_.substr(0, end);
    buffer_.erase(0, end);
    return head;
  }
  void upgrade() {
    send_raw("GET /ws HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
             "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
    handshake = read_http();
  }
  void send_text(const std::string& text) {
    send_raw(steer::ws::encode_frame(steer::ws::text, text, std::array<std::uint8_t, 4>{1, 2, 3, 4}));
  }
  std::optional<steer::ws::Frame> next_frame() {
    for (;;) {
      if (auto f = steer::ws::decode_frame(buffer_)) return f;
      if (!fill()) return std::nullopt;
    }
  }
  std::optional<json> next_json() {
    for (;;) {
      auto f = next_frame();
      if (!f) return std::nullopt;
      if (f->opcode == steer::ws::text) return json::parse(f->payload);
    }
  }
  std::string handshake;

 private:
  int fd_ = -1;
  std::string buffer_;
};

struct RunningServer {
  explicit RunningServer(steer::Session& s, double hz = 10.0)
      : server(s, [&] {
          steer::ServerOptions o;
          o.port = 0;
          o.tick_hz = hz;
          return o;
        }()) {
    server.bind();
    thread = std::thread([this] { result = server.run(); });
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
  steer::Server server;
  std::thread thread;
  std::optional<std::string> result;
};

}  // namespace

TEST_SUITE("websocket") {
  TEST_CASE("accept key matches the handshake example") {
    CHECK(steer::ws::accept_key("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
    CHECK(steer::ws::base64_encode("") == "");
    CHECK(steer::ws::base64_encode("foob") == "Zm9vYg==");
  }

  TEST_CASE("frames round-trip at every length encoding") {
    for (std::size_t len : {0UL, 5UL, 125UL, 126UL, 65535UL, 65536UL, 200000UL}) {
      std::string payload(len, 'x');
      for (std::size_t i = 0; i < len; ++i) payload[i] = static_cast<char>(i * 31);
      for (bool masked : {false, true}) {
        std::optional<std::array<std::uint8_t, 4>> mask;
        if (masked) mask = std::array<std::uint8_t, 4>{0xA1, 0x02, 0xF3, 0x44};
        std::string wire = steer::ws::encode_frame(steer::ws::binary, payload, mask);
        wire += "tail";
        const auto f = steer::ws::decode_frame(wire);
        REQUIRE(f.has_value());
        CHECK(f->fin);
        CHECK(f->opcode == steer::ws::binary);
        CHECK(f->payload == payload);
        CHECK(wire == "tail");
      }
    }
  }

  TEST_CASE("incomplete frames wait for more bytes") {
    const std::string wire = steer::ws::encode_frame(steer::ws::text, std::string(300, 'a'), std::array<std::uint8_t, 4>{9, 9, 9, 9});
    for (std::size_t cut : {0UL, 1UL, 3UL, 7UL, wire.size() - 1}) {
      std::string partial = wire.substr(0, cut);
      CHECK_FALSE(steer::ws::decode_frame(partial).has_value());
      CHECK(partial.size() == cut);
    }
  }

  TEST_CASE("protocol violations throw") {
    std::string reserved = steer::ws::encode_frame(steer::ws::text, "hi");
    reserved[0] = static_cast<char>(reserved[0] | 0x40);
    CHECK_THROWS_AS(steer::ws::decode_frame(reserved), std::runtime_error);
    std::string long_ping = steer::ws::encode_frame(steer::ws::ping, std::string(200, 'p'));
    CHECK_THROWS_AS(steer::ws::decode_frame(long_ping), std::runtime_error);
    std::string big = steer::ws::encode_frame(steer::ws::text, std::string(2000, 'b'));
    CHECK_THROWS_AS(steer::ws::decode_frame(big, 1000), std::runtime_error);
  }
}

TEST_SUITE("session") {
  TEST_CASE("hello announces the metric and bounds") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    const json h = s.hello();
    CHECK(h["type"] == "hello");
    CHECK(h["protocol"] == steer::kProtocolVersion);
    CHECK(h["metric"] == "wang");
    CHECK(h["beta_bounds"][0] == -3.0);
    CHECK(h["beta_bounds"][1] == 3.0);
    CHECK(h["num_atoms"] == 16);
    CHECK(h["beta"] == 0.0);
    steer::Session c(make_checkpoint(RiskKind::cvar), "risky-cliff");
    CHECK(c.hello()["beta"] == 1.0);
    CHECK(c.hello()["beta_open_low"] == false);
  }

  TEST_CASE("set_risk takes effect at the next tick and clamps") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    const json ack = s.handle_client_text(R"({"type":"set_risk","beta":9})");
    CHECK(ack["type"] == "ack");
    CHECK(ack["beta"] == 3.0);
    CHECK(ack["clamped"] == true);
    CHECK(s.beta() == 0.0);
    const auto m = s.tick(0.0);
    REQUIRE(m.has_value());
    CHECK((*m)["beta"] == 3.0);
    CHECK(s.handle_client_text(R"({"type":"set_risk","beta":-1})")["clamped"] == false);
  }

  TEST_CASE("rapid set_risk messages: last writer wins") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    s.handle_client_text(R"({"type":"set_risk","beta":1.0})");
    s.handle_client_text(R"({"type":"set_risk","beta":-2.0})");
    CHECK((*s.tick(0.0))["beta"] == -2.0);
  }

  TEST_CASE("paused sessions emit nothing and pause is idempotent") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    s.handle_client_text(R"({"type":"pause"})");
    s.handle_client_text(R"({"type":"pause"})");
    CHECK_FALSE(s.tick(0.0).has_value());
    CHECK(s.ticks() == 0);
    s.handle_client_text(R"({"type":"resume"})");
    s.handle_client_text(R"({"type":"resume"})");
    CHECK(s.tick(0.1).has_value());
  }

  TEST_CASE("state messages are self-contained and consistent") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    s.handle_client_text(R"({"type":"set_risk","beta":1.2})");
    double sum = 0.0;
    bool saw_done = false, saw_auto = false;
    double t = 0.0;
    for (int k = 0; k < 200 && !saw_auto; ++k, t += 0.1) {
      const json m = *s.tick(t);
      CHECK(m["type"] == "state");
      CHECK(m["atoms"].size() == 16);
      CHECK(m["weights"].size() == 16);
      const auto atoms = m["atoms"].get<std::vector<double>>();
      CHECK(m["distorted_value"].get<double>() ==
            doctest::Approx(reference_wang_value(atoms, m["beta"].get<double>())).epsilon(1e-9));
      if (m["reset"] == "auto") {
        saw_auto = true;
        CHECK(m["cum_return"] == 0.0);
        sum = 0.0;
        continue;
      }
      sum += m["reward"].get<double>();
      CHECK(m["cum_return"].get<double>() == doctest::Approx(sum));
      if (!m["done_info"].is_null()) saw_done = true;
    }
    CHECK(saw_done);
    CHECK(saw_auto);
  }

  TEST_CASE("auto reset waits two seconds after the terminal step") {
    steer::Session s(make_checkpoint(), "risky-cliff-deterministic");
    double t = 0.0;
    std::optional<double> done_at;
    while (!done_at) {
      const json m = *s.tick(t);
      if (!m["done_info"].is_null()) done_at = t;
      t += 0.1;
    }
    for (; t < *done_at + 1.95; t += 0.1) CHECK((*s.tick(t))["reset"].is_null());
    CHECK((*s.tick(*done_at + 2.0))["reset"] == "auto");
  }

  TEST_CASE("reset and set_env") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    s.tick(0.0);
    s.handle_client_text(R"({"type":"reset"})");
    const json m = *s.tick(0.1);
    CHECK(m["reset"] == "manual");
    CHECK(s.handle_client_text(R"({"type":"set_env","name":"risky-cliff-deterministic"})")["type"] == "ack");
    const json e = *s.tick(0.2);
    CHECK(e["env"] == "risky-cliff-deterministic");
    CHECK(e["reset"] == "env");
    CHECK(s.handle_client_text(R"({"type":"set_env","name":"gap-step"})")["type"] == "error");
    CHECK(s.handle_client_text(R"({"type":"set_env","name":"moon"})")["type"] == "error");
  }

  TEST_CASE("bad client input is answered with errors") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    CHECK(s.handle_client_text("{not json")["type"] == "error");
    CHECK(s.handle_client_text("[1,2]")["type"] == "error");
    CHECK(s.handle_client_text(R"({"type":"fly"})")["type"] == "error");
    CHECK(s.handle_client_text(R"({"type":"set_risk","beta":"high"})")["type"] == "error");
    CHECK(s.tick(0.0).has_value());
  }

  TEST_CASE("baselines steer within their own ranges") {
    steer::Session p1(make_checkpoint(RiskKind::wang, algo::Algorithm::ppo1, 1), "risky-cliff");
    CHECK(p1.handle_client_text(R"({"type":"set_risk","beta":5})")["beta"] == 2.0);
    steer::Session p(make_checkpoint(RiskKind::wang, algo::Algorithm::ppo, 1), "risky-cliff");
    CHECK(p.handle_client_text(R"({"type":"set_risk","beta":1})")["beta"] == 0.0);
    CHECK((*p.tick(0.0))["metric"] == "neutral");
  }

  TEST_CASE("a checkpoint that does not fit the environment is refused") {
    CHECK_THROWS_AS(steer::Session(make_checkpoint(), "gap-step"), std::invalid_argument);
  }
}

TEST_SUITE("server") {
  TEST_CASE("health and index pages") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    RunningServer rs(s);
    {
      TestClient c(rs.server.port());
      c.send_raw("GET /health HTTP/1.1\r\nHost: x\r\n\r\n");
      const std::string r = c.read_http();
      CHECK(r.find("200 OK") != std::string::npos);
      const json body = json::parse(r.substr(r.find("\r\n\r\n") + 4));
      CHECK(body["status"] == "ok");
      CHECK(body["version"].is_string());
    }
    {
      TestClient c(rs.server.port());
      c.send_raw("GET / HTTP/1.1\r\nHost: x\r\n\r\n");
      const std::string r = c.read_http();
      CHECK(r.find("200 OK") != std::string::npos);
      CHECK(r.find("text/html") != std::string::npos);
    }
    {
      TestClient c(rs.server.port());
      c.send_raw("POST /health HTTP/1.1\r\nHost: x\r\nContent-Length: 0\r\n\r\n");
      CHECK(c.read_http().find("405") != std::string::npos);
    }
  }

  TEST_CASE("websocket session: hello, ticks, steering latency") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    RunningServer rs(s, 10.0);
    TestClient c(rs.server.port());
    c.upgrade();
    CHECK(c.handshake.find("101 Switching Protocols") != std::string::npos);
    CHECK(c.handshake.find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo=") != std::string::npos);
    const auto hello = c.next_json();
    REQUIRE(hello.has_value());
    CHECK((*hello)["type"] == "hello");

    // Tick rate over two seconds.
    std::vector<double> stamps;
    const auto t0 = std::chrono::steady_clock::now();
    while (stamps.size() < 21) {
      const auto m = c.next_json();
      REQUIRE(m.has_value());
      if ((*m)["type"] == "state") {
        stamps.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        const auto atoms = (*m)["atoms"].get<std::vector<double>>();
        CHECK((*m)["distorted_value"].get<double>() ==
              doctest::Approx(reference_wang_value(atoms, (*m)["beta"].get<double>())).epsilon(1e-9));
      }
    }
    const double rate = 20.0 / (stamps.back() - stamps.front());
    CHECK(rate >= 9.0);
    CHECK(rate <= 11.0);

    // Steering latency.
    const auto sent = std::chrono::steady_clock::now();
    c.send_text(R"({"type":"set_risk","beta":-1.25})");
    bool acked = false;
    for (;;) {
      const auto m = c.next_json();
      REQUIRE(m.has_value());
      if ((*m)["type"] == "ack") {
        acked = true;
        continue;
      }
      if ((*m)["type"] == "state" && (*m)["beta"] == -1.25) break;
    }
    const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - sent).count();
    CHECK(acked);
    CHECK(latency < 0.2);

    c.send_text(R"({"type":"nonsense"})");
    for (;;) {
      const auto m = c.next_json();
      REQUIRE(m.has_value());
      if ((*m)["type"] == "error") break;
    }
    c.send_raw(steer::ws::encode_frame(steer::ws::ping, "p", std::array<std::uint8_t, 4>{5, 6, 7, 8}));
    for (;;) {
      const auto f = c.next_frame();
      REQUIRE(f.has_value());
      if (f->opcode == steer::ws::pong) {
        CHECK(f->payload == "p");
        break;
      }
    }
  }

  TEST_CASE("broadcast reaches every client") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    RunningServer rs(s, 20.0);
    TestClient a(rs.server.port()), b(rs.server.port());
    a.upgrade();
    b.upgrade();
    a.send_text(R"({"type":"set_risk","beta":2.5})");
    for (TestClient* c : {&a, &b}) {
      for (;;) {
        const auto m = c->next_json();
        REQUIRE(m.has_value());
        if ((*m)["type"] == "state" && (*m)["beta"] == 2.5) break;
      }
    }
  }

  TEST_CASE("binding a used port fails") {
    steer::Session s(make_checkpoint(), "risky-cliff");
    RunningServer rs(s);
    steer::ServerOptions o;
    o.port = rs.server.port();
    steer::Server second(s, o);
    CHECK_THROWS_AS(second.bind(), std::runtime_error);
  }
}
