#include "dppo/algo/rollout.hpp"

#include "dppo/algo/shaping.hpp"
#include "dppo/net/gaussian.hpp"

#include <stdexcept>
#include <string>

namespace dppo::algo {

Eigen::MatrixXd Rollout::next_critic_outputs(Eigen::Index lane) const {
  Eigen::MatrixXd next(critic_outputs.rows(), horizon);
  if (horizon > 1) next.leftCols(horizon - 1) = critic_outputs.middleCols(index(lane, 1), horizon - 1);
  next.col(horizon - 1) = bootstrap.col(lane);
  return next;
}

std::vector<Lane> make_lanes(std::string_view env_name, int count, std::mt19937_64& rng) {
  std::vector<Lane> lanes;
  lanes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Lane lane;
    lane.env = envs::make_environment(env_name, rng());
    lane.rng.seed(rng());
    lanes.push_back(std::move(lane));
  }
  return lanes;
}

double training_reward(Algorithm algo, const envs::StepResult& step, double beta) {
  switch (algo) {
    case Algorithm::ppo1: return ppo1_shaped_reward(step.terms, beta);
    case Algorithm::ppo2: return ppo2_shaped_reward(step.terms, beta);
    case Algorithm::dppo:
    case Algorithm::ppo: break;
  }
  return step.reward;
}

namespace {

double sample_beta(const BetaRange& range, std::mt19937_64& rng) {
  if (range.high <= range.low) return range.high;
  // Uniform on (low, high]; the closed end matters for CVaR's (0, 1].
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return range.high - u * (range.high - range.low);
}

void start_episode(Lane& lane, const Agent& agent, const BetaRange& range) {
  lane.beta = agent.conditioning.uses_beta() ? sample_beta(range, lane.rng) : 0.0;
  lane.env->set_risk_feature(agent.conditioning.feature(lane.beta));
  lane.observation = lane.env->reset();
  lane.episode_return = 0.0;
  lane.episode_steps = 0;
  lane.needs_reset = false;
}

}  // namespace

Rollout collect_rollouts(std::vector<Lane>& lanes, const Agent& agent, const BetaRange& range, int horizon) {
  if (lanes.empty() || horizon < 1) throw std::invalid_argument("collect_rollouts: need lanes and a positive horizon");
  const auto n_lanes = static_cast<Eigen::Index>(lanes.size());
  const Eigen::Index obs_dim = agent.actor.inputs();
  const Eigen::Index act_dim = agent.actor.outputs();

  Rollout r;
  r.lanes = n_lanes;
  r.horizon = horizon;
  const Eigen::Index s_total = r.samples();
  r.observations.resize(obs_dim, s_total);
  r.actions.resize(act_dim, s_total);
  r.rewards.resize(s_total);
  r.base_rewards.resize(s_total);
  r.dones.assign(static_cast<std::size_t>(s_total), false);
  r.terminated.assign(static_cast<std::size_t>(s_total), false);
  r.log_probs.resize(s_total);
  r.betas.resize(s_total);
  r.critic_outputs.resize(agent.critic_width(), s_total);

  Eigen::MatrixXd batch(obs_dim, n_lanes);
  for (int t = 0; t < horizon; ++t) {
    for (Eigen::Index l = 0; l < n_lanes; ++l) {
      Lane& lane = lanes[static_cast<std::size_t>(l)];
      if (lane.needs_reset) start_episode(lane, agent, range);
      batch.col(l) = lane.observation;
    }
    const Eigen::MatrixXd means = agent.action_means(batch);
    const Eigen::MatrixXd critic = agent.critic_outputs(batch);

    for (Eigen::Index l = 0; l < n_lanes; ++l) {
      Lane& lane = lanes[static_cast<std::size_t>(l)];
      const Eigen::Index s = r.index(l, t);
      const Eigen::VectorXd mean = means.col(l);
      const Eigen::VectorXd action = agent.head.sample(mean, lane.rng);

      envs::StepResult step;
      try {
        step = lane.env->step(action);
      } catch (const std::exception& e) {
        throw std::runtime_error("environment fault in lane " + std::to_string(l) + ": " + e.what());
      }

      r.observations.col(s) = batch.col(l);
      r.actions.col(s) = action;
      r.log_probs(s) = net::policy_logprob_and_grad(agent.head, mean, action).logp;
      r.betas(s) = lane.beta;
      r.critic_outputs.col(s) = critic.col(l);
      r.base_rewards(s) = step.reward;
      r.rewards(s) = training_reward(agent.conditioning.algo, step, lane.beta);
      r.dones[static_cast<std::size_t>(s)] = step.done();
      r.terminated[static_cast<std::size_t>(s)] = step.terminated;

      lane.episode_return += step.reward;
      ++lane.episode_steps;
      lane.observation = step.observation;
      if (step.done()) {
        const bool early = step.event == envs::Event::fell || step.event == envs::Event::failed;
        r.episodes.push_back({lane.beta, lane.episode_return, early, lane.episode_steps});
        lane.needs_reset = true;
      }
    }
  }

  // Bootstrap from s_T; lanes whose episode just ended never read it.
  for (Eigen::Index l = 0; l < n_lanes; ++l) {
    Lane& lane = lanes[static_cast<std::size_t>(l)];
    batch.col(l) = lane.observation;
  }
  r.bootstrap = agent.critic_outputs(batch);
  return r;
}

}  // namespace dppo::algo
