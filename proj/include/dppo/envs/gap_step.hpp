#pragma once

#include "dppo/envs/environment.hpp"

#include <array>

namespace dppo::envs {

/// 1-D corridor x in [0, 4] with a step obstacle at x = 2. The first time the
/// agent reaches it, the crossing succeeds with a probability that falls with
/// the obstacle height; a failed crossing ends the episode.
class GapStep final : public Environment {
 public:
  static constexpr double kLength = 4.0;
  static constexpr double kObstacleX = 2.0;
  static constexpr double kLandingX = 2.2;
  static constexpr double kMaxStride = 0.5;
  static constexpr double kAliveReward = 0.2;
  static constexpr double kFailPenalty = -8.0;
  static constexpr double kGoalBonus = 8.0;
  static constexpr int kMaxSteps = 16;
  static constexpr std::array<double, 4> kHeights = {0.2, 0.3, 0.4, 0.5};

  /// `fixed_height` pins h instead of drawing it uniformly at each reset.
  explicit GapStep(std::uint64_t seed = 0, std::optional<double> fixed_height = std::nullopt);

  static double success_probability(double height);

  std::string_view name() const override { return "gap-step"; }
  Eigen::Index observation_dim() const override { return 3; }
  Eigen::Index action_dim() const override { return 1; }
  int max_steps() const override { return kMaxSteps; }
  double commanded_rate() const override { return kMaxStride; }

  Observation reset(std::optional<std::uint64_t> seed = std::nullopt) override;
  using Environment::step;
  StepResult step(const Action& action, Chance& chance) override;

  Observation observation() const override;
  Eigen::VectorXd position() const override { return Eigen::VectorXd::Constant(1, x_); }
  double progress() const override { return x_; }
  int elapsed_steps() const override { return t_; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<GapStep>(*this); }
  std::vector<std::pair<double, std::unique_ptr<Environment>>> reset_branches() const override;

  double height() const { return height_; }
  bool attempted() const { return attempted_; }
  std::optional<double> fixed_height() const { return fixed_height_; }

 private:
  std::optional<double> fixed_height_;
  double x_ = 0.0;
  double height_ = kHeights[0];
  int t_ = 0;
  bool attempted_ = false;
  bool finished_ = false;
};

}  // namespace dppo::envs
