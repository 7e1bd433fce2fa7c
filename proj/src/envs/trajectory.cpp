#include "dppo/envs/trajectory.hpp"

#include "dppo/envs/risky_cliff.hpp"

#include <algorithm>
#include <stdexcept>

namespace dppo::envs {

std::string_view to_string(PathClass c) {
  switch (c) {
    case PathClass::safe: return "safe";
    case PathClass::risky: return "risky";
    case PathClass::refusal: return "refusal";
    case PathClass::failure: return "failure";
    case PathClass::success: return "success";
  }
  return "safe";
}

namespace {
void require_complete(const Trajectory& t) {
  if (!t.complete) throw std::invalid_argument("classify_path: trajectory is incomplete");
}
bool has(const Trajectory& t, Event e) { return std::find(t.events.begin(), t.events.end(), e) != t.events.end(); }
}  // namespace

PathClass classify_cliff_path(const Trajectory& trajectory) {
  require_complete(trajectory);
  if (has(trajectory, Event::fell)) return PathClass::risky;
  for (const auto& p : trajectory.positions) {
    if (p.size() >= 2 && p(1) < RiskyCliff::kHazardY) return PathClass::risky;
  }
  return PathClass::safe;
}

PathClass classify_gap_outcome(const Trajectory& trajectory) {
  require_complete(trajectory);
  if (has(trajectory, Event::succeeded)) return PathClass::success;
  if (has(trajectory, Event::failed) || has(trajectory, Event::crossed)) return PathClass::failure;
  return PathClass::refusal;
}

PathClass classify_path(std::string_view env_name, const Trajectory& trajectory) {
  if (env_name == "gap-step") return classify_gap_outcome(trajectory);
  if (env_name == "risky-cliff" || env_name == "risky-cliff-deterministic") return classify_cliff_path(trajectory);
  throw std::invalid_argument("classify_path: unknown environment '" + std::string(env_name) + "'");
}

}  // namespace dppo::envs
