#include "dppo/envs/environment.hpp"

#include "dppo/envs/gap_step.hpp"
#include "dppo/envs/risky_cliff.hpp"

#include <algorithm>
#include <stdexcept>

namespace dppo::envs {

std::string_view to_string(Event e) {
  switch (e) {
    case Event::none: return "none";
    case Event::fell: return "fell";
    case Event::failed: return "failed";
    case Event::crossed: return "crossed";
    case Event::succeeded: return "succeeded";
    case Event::refused: return "refused";
  }
  return "none";
}

std::vector<std::pair<double, std::unique_ptr<Environment>>> Environment::reset_branches() const {
  std::vector<std::pair<double, std::unique_ptr<Environment>>> out;
  auto env = clone();
  env->reset();
  out.emplace_back(1.0, std::move(env));
  return out;
}

double Environment::clamp_action(double a) {
  if (a < -1.0 || a > 1.0) ++clamped_actions_;
  return std::clamp(a, -1.0, 1.0);
}

std::unique_ptr<Environment> make_environment(std::string_view name, std::uint64_t seed) {
  if (name == "risky-cliff") return std::make_unique<RiskyCliff>(RiskyCliff::kDefaultFallProbability, seed);
  if (name == "risky-cliff-deterministic") return std::make_unique<RiskyCliff>(0.0, seed);
  if (name == "gap-step") return std::make_unique<GapStep>(seed);
  throw std::invalid_argument("unknown environment '" + std::string(name) +
                              "' (expected risky-cliff, risky-cliff-deterministic or gap-step)");
}

std::vector<std::string> environment_names() {
  return {"risky-cliff", "risky-cliff-deterministic", "gap-step"};
}

}  // namespace dppo::envs
