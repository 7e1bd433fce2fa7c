#pragma once

#include "dppo/envs/environment.hpp"

#include <string_view>
#include <vector>

namespace dppo::envs {

enum class PathClass { safe, risky, refusal, failure, success };

std::string_view to_string(PathClass c);

/// Visited positions (including the start) and per-step events of one episode.
struct Trajectory {
  std::vector<Eigen::VectorXd> positions;
  std::vector<Event> events;
  bool complete = false;
};

/// Risky iff any visited y < 1 (or a fall happened).
PathClass classify_cliff_path(const Trajectory& trajectory);
/// Refusal = never attempted the obstacle, failure = attempted without
/// reaching the goal, success = goal reached.
PathClass classify_gap_outcome(const Trajectory& trajectory);
PathClass classify_path(std::string_view env_name, const Trajectory& trajectory);

}  // namespace dppo::envs
