#pragma once

#include "dppo/envs/environment.hpp"

namespace dppo::envs {

/// 2-D traversal from (0, 2) to x = 10. The strip y < 1 doubles the speed but
/// every step ending there may end the episode in a fall.
class RiskyCliff final : public Environment {
 public:
  static constexpr double kWidth = 10.0;
  static constexpr double kHeight = 4.0;
  static constexpr double kStartY = 2.0;
  static constexpr double kHazardY = 1.0;
  static constexpr double kSafeSpeed = 1.0;
  static constexpr double kHazardSpeed = 2.0;
  static constexpr double kStepCost = 0.5;
  static constexpr double kFallPenalty = -10.0;
  static constexpr double kGoalBonus = 10.0;
  static constexpr double kDefaultFallProbability = 0.02;
  static constexpr int kMaxSteps = 40;

  explicit RiskyCliff(double fall_probability = kDefaultFallProbability, std::uint64_t seed = 0);

  std::string_view name() const override;
  Eigen::Index observation_dim() const override { return 3; }
  Eigen::Index action_dim() const override { return 2; }
  int max_steps() const override { return kMaxSteps; }
  double commanded_rate() const override { return kSafeSpeed; }

  Observation reset(std::optional<std::uint64_t> seed = std::nullopt) override;
  using Environment::step;
  StepResult step(const Action& action, Chance& chance) override;

  Observation observation() const override;
  Eigen::VectorXd position() const override { return Eigen::Vector2d(x_, y_); }
  double progress() const override { return x_; }
  int elapsed_steps() const override { return t_; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<RiskyCliff>(*this); }

  double fall_probability() const { return fall_probability_; }
  bool visited_hazard() const { return visited_hazard_; }

 private:
  double fall_probability_;
  double x_ = 0.0;
  double y_ = kStartY;
  int t_ = 0;
  bool visited_hazard_ = false;
  bool finished_ = false;
};

}  // namespace dppo::envs
