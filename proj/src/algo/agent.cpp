#include "dppo/algo/agent.hpp"

namespace dppo::algo {

Agent Agent::initialise(Eigen::Index obs_dim, Eigen::Index action_dim, const DppoConfig& cfg, Algorithm algo,
                        std::mt19937_64& rng) {
  std::vector<Eigen::Index> actor_sizes{obs_dim};
  for (int h : cfg.hidden_sizes) actor_sizes.push_back(h);
  std::vector<Eigen::Index> critic_sizes = actor_sizes;
  actor_sizes.push_back(action_dim);
  critic_sizes.push_back(algo == Algorithm::dppo ? cfg.num_atoms : 1);

  Agent agent;
  agent.actor = net::Mlp<double>::orthogonal(actor_sizes, 1.0, 0.01, rng);
  agent.head = net::GaussianHead<double>(action_dim);
  agent.critic = net::Mlp<double>::orthogonal(critic_sizes, 1.0, 1.0, rng);
  agent.conditioning = {algo, cfg.metric};
  agent.critic_risk_input = cfg.critic_risk_input;
  agent.value_scale = cfg.value_scale;
  return agent;
}

Eigen::MatrixXd Agent::critic_input(const Eigen::MatrixXd& observations) const {
  if (critic_risk_input) return observations;
  Eigen::MatrixXd masked = observations;
  masked.bottomRows(1).setZero();
  return masked;
}

Eigen::VectorXd Agent::actor_parameters() const {
  const Eigen::VectorXd mlp = actor.flatten();
  Eigen::VectorXd flat(mlp.size() + head.dim());
  flat << mlp, head.log_std;
  return flat;
}

void Agent::assign_actor_parameters(const Eigen::VectorXd& flat) {
  const Eigen::Index n = actor.parameter_count();
  actor.assign(flat.head(n));
  head.log_std = flat.tail(head.dim());
  head.clamp();
}

}  // namespace dppo::algo
