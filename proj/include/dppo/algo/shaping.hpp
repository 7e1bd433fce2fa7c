#pragma once

#include "dppo/envs/environment.hpp"

#include <string_view>

namespace dppo::algo {

/// Reward-scaling baseline: the tracking term is multiplied by beta, all other
/// terms pass through. beta = 1 reproduces the unshaped reward.
double ppo1_shaped_reward(const envs::RewardTerms& terms, double beta, std::string_view tracking_term = "progress");

/// Distortion baseline: the M term values are treated as equally weighted
/// atoms and replaced by M times their Wang(beta)-distorted mean. beta = 0
/// reproduces the plain sum.
double ppo2_shaped_reward(const envs::RewardTerms& terms, double beta);

}  // namespace dppo::algo
