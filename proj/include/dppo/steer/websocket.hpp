#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace dppo::steer::ws {

enum Opcode : std::uint8_t { continuation = 0x0, text = 0x1, binary = 0x2, close = 0x8, ping = 0x9, pong = 0xA };

struct Frame {
  bool fin = true;
  std::uint8_t opcode = text;
  std::string payload;
};

/// Sec-WebSocket-Accept value for a client's Sec-WebSocket-Key.
std::string accept_key(std::string_view client_key);

std::string base64_encode(std::string_view bytes);

/// Serialises one frame. Clients must pass a mask; servers must not.
std::string encode_frame(std::uint8_t opcode, std::string_view payload,
                         std::optional<std::array<std::uint8_t, 4>> mask = std::nullopt, bool fin = true);

/// Removes and returns the first complete frame in `buffer`, or nothing when
/// more bytes are needed. Throws std::runtime_error on protocol violations or
/// payloads above `max_payload`.
std::optional<Frame> decode_frame(std::string& buffer, std::size_t max_payload = std::size_t{1} << 20);

}  // namespace dppo::steer::ws
