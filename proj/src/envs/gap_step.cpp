#include "dppo/envs/gap_step.hpp"

#include <algorithm>
#include <stdexcept>

namespace dppo::envs {

GapStep::GapStep(std::uint64_t seed, std::optional<double> fixed_height) : fixed_height_(fixed_height) {
  if (fixed_height && !(*fixed_height >= 0.0)) throw std::invalid_argument("GapStep: height must be >= 0");
  rng_.seed(seed);
}

double GapStep::success_probability(double height) { return std::clamp(1.3 - 2.0 * height, 0.05, 0.95); }

Observation GapStep::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  if (fixed_height_) {
    height_ = *fixed_height_;
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, kHeights.size() - 1);
    height_ = kHeights[pick(rng_)];
  }
  x_ = 0.0;
  t_ = 0;
  attempted_ = false;
  finished_ = false;
  return observation();
}

Observation GapStep::observation() const { return Eigen::Vector3d(x_ / kLength, height_, risk_feature_); }

StepResult GapStep::step(const Action& action, Chance& chance) {
  if (finished_) throw std::logic_error("GapStep::step called on a finished episode");
  if (action.size() != 1) throw std::invalid_argument("GapStep::step expects a 1-D action");

  x_ = std::clamp(x_ + kMaxStride * clamp_action(action(0)), 0.0, kLength);
  ++t_;

  StepResult r;
  double alive = kAliveReward, progress = 0.0, fall = 0.0;
  if (!attempted_ && x_ >= kObstacleX) {
    attempted_ = true;
    if (chance.bernoulli(success_probability(height_))) {
      x_ = kLandingX;
      r.event = Event::crossed;
    } else {
      alive = 0.0;
      fall = kFailPenalty;
      r.terminated = true;
      r.event = Event::failed;
    }
  }
  if (!r.terminated && x_ >= kLength) {
    progress = kGoalBonus;
    r.terminated = true;
    r.event = Event::succeeded;
  }
  if (!r.terminated && t_ >= kMaxSteps) {
    r.truncated = true;
    if (!attempted_) r.event = Event::refused;
  }

  r.terms = {{"progress", progress}, {"alive", alive}, {"fall", fall}};
  r.reward = progress + alive + fall;
  r.observation = observation();
  finished_ = r.done();
  return r;
}

std::vector<std::pair<double, std::unique_ptr<Environment>>> GapStep::reset_branches() const {
  std::vector<std::pair<double, std::unique_ptr<Environment>>> out;
  if (fixed_height_) {
    auto env = std::make_unique<GapStep>(*this);
    env->reset();
    out.emplace_back(1.0, std::move(env));
    return out;
  }
  for (double h : kHeights) {
    auto env = std::make_unique<GapStep>(0, h);
    env->set_risk_feature(risk_feature_);
    env->reset();
    out.emplace_back(1.0 / static_cast<double>(kHeights.size()), std::move(env));
  }
  return out;
}

}  // namespace dppo::envs
