#pragma once

#include "dppo/core/risk.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dppo::algo {

/// dppo: distributional critic + risk metric. ppo: scalar critic, no risk
/// input. ppo1 / ppo2: scalar critic with risk folded into the reward.
enum class Algorithm { dppo, ppo, ppo1, ppo2 };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);

enum class CriticLoss { energy, quantile_huber };

std::string_view to_string(CriticLoss l);
CriticLoss critic_loss_from_string(std::string_view name);

struct DppoConfig {
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double sr_lambda = 1.0;
  double clip_epsilon = 0.2;
  double learning_rate = 3e-4;
  int epochs = 4;
  int minibatches = 4;
  int num_envs = 16;
  int horizon = 64;
  int num_atoms = 32;
  RiskKind metric = RiskKind::wang;
  /// Unset bounds fall back to the default range of the metric / algorithm.
  std::optional<double> beta_min;
  std::optional<double> beta_max;
  int iterations = 1000;
  std::uint64_t seed = 0;
  double entropy_coef = 0.0;
  CriticLoss critic_loss = CriticLoss::energy;
  double huber_kappa = 1.0;
  std::vector<int> hidden_sizes = {64, 64};
  double max_grad_norm = 1.0;
  bool normalize_advantages = true;
  /// Feed the risk parameter to the critic as well as the actor.
  bool critic_risk_input = true;
  /// Critic outputs are multiplied by this, so the network itself works on
  /// returns of order one and its tanh units stay out of saturation.
  double value_scale = 10.0;
  /// Write an intermediate checkpoint every K iterations (0 = only at the end).
  int checkpoint_every = 0;

  /// Throws std::invalid_argument describing the first invalid field.
  void validate(Algorithm algo) const;
};

/// Range risk parameters are sampled from when training `algo`.
BetaRange resolved_beta_range(const DppoConfig& cfg, Algorithm algo);

/// Maps a risk parameter onto the observation feature the networks see.
struct RiskConditioning {
  Algorithm algo = Algorithm::dppo;
  RiskKind metric = RiskKind::wang;

  double feature(double beta) const;
  /// Metric used for V_beta; only meaningful for dppo.
  RiskMetric metric_at(double beta) const { return {algo == Algorithm::dppo ? metric : RiskKind::neutral, beta}; }
  bool uses_beta() const { return algo != Algorithm::ppo && !(algo == Algorithm::dppo && metric == RiskKind::neutral); }
};

void to_json(nlohmann::json& j, const DppoConfig& cfg);
/// Strict parse: unknown keys and wrong types are errors. Missing keys keep
/// their defaults.
void from_json(const nlohmann::json& j, DppoConfig& cfg);

}  // namespace dppo::algo
