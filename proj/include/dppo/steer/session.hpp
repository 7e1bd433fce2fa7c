#pragma once

#include "dppo/algo/agent.hpp"
#include "dppo/envs/environment.hpp"
#include "dppo/io/checkpoint.hpp"

#include <json.hpp>

#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace dppo::steer {

inline constexpr int kProtocolVersion = 1;

/// Beta range an operator may steer a checkpoint through.
BetaRange steering_bounds(const algo::RiskConditioning& conditioning);

/// Live policy rollout driven by a tick loop. Client messages only touch the
/// mailbox; the ticking thread applies them at the start of the next tick.
class Session {
 public:
  Session(io::Checkpoint checkpoint, std::string env_name, std::uint64_t seed = 0, double auto_reset_seconds = 2.0);

  /// Handshake sent to every new client.
  nlohmann::json hello() const;

  /// Parses one client text frame and returns the reply (ack or error).
  /// Never throws for bad input.
  nlohmann::json handle_client_text(const std::string& text);

  /// Applies pending mailbox entries, then advances the episode by one step.
  /// Returns the state message, or nothing while paused or after a fatal
  /// error (in which case `fatal_error()` is set and the error message is
  /// returned once).
  std::optional<nlohmann::json> tick(double now_seconds);

  bool paused() const;
  std::optional<std::string> fatal_error() const;
  double beta() const { return beta_; }
  std::uint64_t ticks() const { return tick_; }

 private:
  struct Mailbox {
    std::optional<double> beta;
    bool reset = false;
    bool paused = false;
    std::optional<std::string> env;
  };

  void start_episode(const char* reason);
  nlohmann::json state_message(double reward);
  nlohmann::json error(const std::string& message) const;

  io::Checkpoint checkpoint_;
  std::string env_name_;
  std::uint64_t seed_;
  double auto_reset_seconds_;
  BetaRange bounds_;

  mutable std::mutex mutex_;
  Mailbox mailbox_;

  // Owned by the ticking thread.
  std::unique_ptr<envs::Environment> env_;
  envs::Observation observation_;
  double beta_ = 0.0;
  std::uint64_t tick_ = 0;
  std::uint64_t episode_ = 0;
  double cum_return_ = 0.0;
  std::optional<std::string> done_info_;  // event that ended the episode
  std::optional<double> done_at_;
  const char* reset_reason_ = nullptr;
  std::optional<std::string> fatal_;
  bool fatal_reported_ = false;
};

}  // namespace dppo::steer
