#pragma once

#include "dppo/algo/config.hpp"
#include "dppo/net/gaussian.hpp"
#include "dppo/net/mlp.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace dppo::algo {

/// Risk-conditioned actor (Gaussian over actions) and critic. The critic
/// outputs N atoms for dppo and a single value for the scalar baselines.
struct Agent {
  net::Mlp<double> actor;
  net::GaussianHead<double> head;
  net::Mlp<double> critic;
  RiskConditioning conditioning;
  bool critic_risk_input = true;
  /// Factor applied to the raw critic network output.
  double value_scale = 1.0;

  /// Fresh networks: orthogonal init, gain 1 on hidden layers, 0.01 on the
  /// actor output, 1 on the critic output; log_std = 0.
  static Agent initialise(Eigen::Index obs_dim, Eigen::Index action_dim, const DppoConfig& cfg, Algorithm algo,
                          std::mt19937_64& rng);

  Eigen::Index critic_width() const { return critic.outputs(); }
  bool distributional() const { return conditioning.algo == Algorithm::dppo; }

  /// Critic input: the observation, with the risk feature (last entry) zeroed
  /// when the critic is not risk-conditioned.
  Eigen::MatrixXd critic_input(const Eigen::MatrixXd& observations) const;

  Eigen::MatrixXd action_means(const Eigen::MatrixXd& observations) const { return actor.forward(observations); }
  Eigen::MatrixXd critic_outputs(const Eigen::MatrixXd& observations) const {
    return value_scale * critic.forward(critic_input(observations));
  }

  /// Flat actor parameters: MLP parameters followed by log_std.
  Eigen::VectorXd actor_parameters() const;
  void assign_actor_parameters(const Eigen::VectorXd& flat);
};

}  // namespace dppo::algo
