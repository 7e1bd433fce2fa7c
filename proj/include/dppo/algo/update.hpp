#pragma once

#include "dppo/algo/agent.hpp"
#include "dppo/algo/config.hpp"
#include "dppo/algo/rollout.hpp"
#include "dppo/net/adam.hpp"

#include <Eigen/Core>

#include <random>

namespace dppo::algo {

struct UpdateStats {
  double policy_loss = 0.0;
  double critic_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct Optimizers {
  net::AdamState actor;
  net::AdamState critic;

  static Optimizers for_agent(const Agent& agent, double learning_rate);
};

/// Clipped surrogate min(r A, g(eps, A)) with g = (1 + eps) A for A >= 0 and
/// (1 - eps) A otherwise.
inline double clip_objective(double ratio, double advantage, double epsilon) {
  const double clipped = advantage >= 0.0 ? (1.0 + epsilon) * advantage : (1.0 - epsilon) * advantage;
  return std::min(ratio * advantage, clipped);
}

/// d clip_objective / d ratio: A on the unclipped branch, 0 where the bound binds.
inline double clip_objective_slope(double ratio, double advantage, double epsilon) {
  const double clipped = advantage >= 0.0 ? (1.0 + epsilon) * advantage : (1.0 - epsilon) * advantage;
  return ratio * advantage < clipped ? advantage : 0.0;
}

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;  // flat parameters of the network the loss belongs to
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Negated mean clip objective (minus the entropy bonus) over a minibatch and
/// its gradient with respect to the flat actor parameters.
LossAndGrad actor_loss(const Agent& agent, const Eigen::MatrixXd& observations, const Eigen::MatrixXd& actions,
                       const Eigen::VectorXd& old_log_probs, const Eigen::VectorXd& advantages, double epsilon,
                       double entropy_coef);

/// Mean per-sample distance between predicted atoms and target atoms
/// (targets are N x B), with gradient w.r.t. the flat critic parameters.
LossAndGrad distributional_critic_loss(const Agent& agent, const Eigen::MatrixXd& observations,
                                       const Eigen::MatrixXd& targets, CriticLoss kind, double kappa);

/// Mean squared error of the scalar critic against `returns`.
LossAndGrad scalar_critic_loss(const Agent& agent, const Eigen::MatrixXd& observations,
                               const Eigen::VectorXd& returns);

struct AdvantageEstimate {
  Eigen::VectorXd advantages;
  Eigen::VectorXd values;
  Eigen::VectorXd returns;  // advantages + values
};

/// Truncated GAE per lane from per-sample values and per-lane bootstrap values.
AdvantageEstimate estimate_advantages(const Rollout& rollout, const Eigen::VectorXd& values,
                                      const Eigen::VectorXd& bootstrap_values, double gamma, double lambda_gae);

/// V_beta of every sample under its own beta, and of each lane's s_T under
/// the beta of the lane's last step.
std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_risk_values(const Rollout& rollout, const Agent& agent);

/// SR(lambda) target atoms (N x S) for every sample of the rollout.
Eigen::MatrixXd sr_targets(const Rollout& rollout, double sr_lambda, double gamma, std::mt19937_64& rng);

/// Zero-mean, unit-variance rescaling.
Eigen::VectorXd normalize(const Eigen::VectorXd& v);

/// Rescales `grad` so its norm is at most `max_norm`.
void clip_gradient(Eigen::VectorXd& grad, double max_norm);

UpdateStats dppo_update(const Rollout& rollout, Agent& agent, Optimizers& opt, const DppoConfig& cfg,
                        std::mt19937_64& rng);
UpdateStats ppo_update(const Rollout& rollout, Agent& agent, Optimizers& opt, const DppoConfig& cfg,
                       std::mt19937_64& rng);

}  // namespace dppo::algo
