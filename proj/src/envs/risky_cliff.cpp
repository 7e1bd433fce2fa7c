#include "dppo/envs/risky_cliff.hpp"

#include <algorithm>
#include <stdexcept>

namespace dppo::envs {

RiskyCliff::RiskyCliff(double fall_probability, std::uint64_t seed) : fall_probability_(fall_probability) {
  if (!(fall_probability >= 0.0 && fall_probability <= 1.0)) {
    throw std::invalid_argument("RiskyCliff: fall probability must lie in [0, 1]");
  }
  rng_.seed(seed);
}

std::string_view RiskyCliff::name() const {
  return fall_probability_ == 0.0 ? "risky-cliff-deterministic" : "risky-cliff";
}

Observation RiskyCliff::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  x_ = 0.0;
  y_ = kStartY;
  t_ = 0;
  visited_hazard_ = false;
  finished_ = false;
  return observation();
}

Observation RiskyCliff::observation() const {
  return Eigen::Vector3d(x_ / kWidth, y_ / kHeight, risk_feature_);
}

StepResult RiskyCliff::step(const Action& action, Chance& chance) {
  if (finished_) throw std::logic_error("RiskyCliff::step called on a finished episode");
  if (action.size() != 2) throw std::invalid_argument("RiskyCliff::step expects a 2-D action");

  const double speed = y_ < kHazardY ? kHazardSpeed : kSafeSpeed;
  const double ax = clamp_action(action(0));
  const double ay = clamp_action(action(1));
  const double x_before = x_;
  x_ = std::clamp(x_ + speed * ax, 0.0, kWidth);
  y_ = std::clamp(y_ + speed * ay, 0.0, kHeight);
  ++t_;

  StepResult r;
  double progress = (x_ - x_before) - kStepCost;
  double fall = 0.0;
  if (y_ < kHazardY) {
    visited_hazard_ = true;
    if (fall_probability_ > 0.0 && chance.bernoulli(fall_probability_)) {
      fall = kFallPenalty;
      r.terminated = true;
      r.event = Event::fell;
    }
  }
  if (!r.terminated && x_ >= kWidth) {
    progress += kGoalBonus;
    r.terminated = true;
    r.event = Event::succeeded;
  }
  if (!r.terminated && t_ >= kMaxSteps) r.truncated = true;

  r.terms = {{"progress", progress}, {"fall", fall}};
  r.reward = progress + fall;
  r.observation = observation();
  finished_ = r.done();
  return r;
}

}  // namespace dppo::envs
