#pragma once

#include "dppo/algo/agent.hpp"
#include "dppo/algo/config.hpp"
#include "dppo/envs/environment.hpp"

#include <Eigen/Core>

#include <memory>
#include <random>
#include <vector>

namespace dppo::algo {

/// One environment lane and the bookkeeping of its running episode.
struct Lane {
  std::unique_ptr<envs::Environment> env;
  envs::Observation observation;
  std::mt19937_64 rng;
  double beta = 0.0;
  double episode_return = 0.0;
  int episode_steps = 0;
  bool needs_reset = true;
};

struct EpisodeSummary {
  double beta;
  double base_return;
  bool early_termination;
  int steps;
};

/// Fixed-horizon batch. Sample s = lane * horizon + t, so each lane's segment
/// is contiguous.
struct Rollout {
  Eigen::Index lanes = 0;
  Eigen::Index horizon = 0;
  Eigen::MatrixXd observations;  // obs_dim x S
  Eigen::MatrixXd actions;       // action_dim x S (pre-clamp samples)
  Eigen::VectorXd rewards;       // training reward (shaped for ppo1/ppo2)
  Eigen::VectorXd base_rewards;  // environment reward
  std::vector<bool> dones;       // terminated or truncated
  std::vector<bool> terminated;
  Eigen::VectorXd log_probs;     // behaviour log-probabilities
  Eigen::VectorXd betas;
  Eigen::MatrixXd critic_outputs;  // critic width x S, at s_t
  Eigen::MatrixXd bootstrap;       // critic width x lanes, at s_T
  std::vector<EpisodeSummary> episodes;

  Eigen::Index samples() const { return lanes * horizon; }
  Eigen::Index index(Eigen::Index lane, Eigen::Index t) const { return lane * horizon + t; }
  /// Critic outputs at s_{t+1} for every step of `lane` (critic width x T).
  Eigen::MatrixXd next_critic_outputs(Eigen::Index lane) const;
};

/// Builds `count` lanes of `env_name` with independent seeded streams.
std::vector<Lane> make_lanes(std::string_view env_name, int count, std::mt19937_64& rng);

/// Runs every lane for `horizon` steps with actions sampled from the Gaussian
/// head. Beta is drawn uniformly from `range` at each episode start and written
/// into the observation feature.
Rollout collect_rollouts(std::vector<Lane>& lanes, const Agent& agent, const BetaRange& range, int horizon);

/// Reward used for training `algo` given an environment step.
double training_reward(Algorithm algo, const envs::StepResult& step, double beta);

}  // namespace dppo::algo
