#include "dppo/steer/websocket.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <stdexcept>
#include <vector>

namespace dppo::steer::ws {

std::string base64_encode(std::string_view bytes) {
  std::vector<unsigned char> out(4 * ((bytes.size() + 2) / 3) + 1);
  const int n = EVP_EncodeBlock(out.data(), reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  return std::string(reinterpret_cast<const char*>(out.data()), static_cast<std::size_t>(n));
}

std::string accept_key(std::string_view client_key) {
  static constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  const std::string joined = std::string(client_key) + std::string(kGuid);
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
  return base64_encode(std::string_view(reinterpret_cast<const char*>(digest), sizeof digest));
}

std::string encode_frame(std::uint8_t opcode, std::string_view payload, std::optional<std::array<std::uint8_t, 4>> mask,
                         bool fin) {
  std::string out;
  out.push_back(static_cast<char>((fin ? 0x80 : 0x00) | (opcode & 0x0F)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::size_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<char>(mask_bit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> shift) & 0xFF));
  }
  if (!mask) return out.append(payload);
  for (auto b : *mask) out.push_back(static_cast<char>(b));
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<char>(payload[i] ^ static_cast<char>((*mask)[i % 4])));
  return out;
}

std::optional<Frame> decode_frame(std::string& buffer, std::size_t max_payload) {
  if (buffer.size() < 2) return std::nullopt;
  const auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(buffer[i]); };
  Frame frame;
  frame.fin = (byte(0) & 0x80) != 0;
  if (byte(0) & 0x70) throw std::runtime_error("websocket: reserved bits set");
  frame.opcode = byte(0) & 0x0F;
  const bool masked = (byte(1) & 0x80) != 0;
  std::uint64_t len = byte(1) & 0x7F;
  std::size_t pos = 2;
  if (len == 126) {
    if (buffer.size() < 4) return std::nullopt;
    len = (std::uint64_t{byte(2)} << 8) | byte(3);
    pos = 4;
  } else if (len == 127) {
    if (buffer.size() < 10) return std::nullopt;
    len = 0;
    for (std::size_t i = 0; i < 8; ++i) len = (len << 8) | byte(2 + i);
    pos = 10;
  }
  if (len > max_payload) throw std::runtime_error("websocket: frame of " + std::to_string(len) + " bytes is too large");
  if (frame.opcode >= 0x8 && (len > 125 || !frame.fin)) throw std::runtime_error("websocket: malformed control frame");
  std::array<std::uint8_t, 4> mask{};
  if (masked) {
    if (buffer.size() < pos + 4) return std::nullopt;
    for (std::size_t i = 0; i < 4; ++i) mask[i] = byte(pos + i);
    pos += 4;
  }
  if (buffer.size() < pos + len) return std::nullopt;
  frame.payload = buffer.substr(pos, static_cast<std::size_t>(len));
  if (masked) {
    for (std::size_t i = 0; i < frame.payload.size(); ++i) frame.payload[i] = static_cast<char>(frame.payload[i] ^ mask[i % 4]);
  }
  buffer.erase(0, pos + static_cast<std::size_t>(len));
  return frame;
}

}  // namespace dppo::steer::ws
