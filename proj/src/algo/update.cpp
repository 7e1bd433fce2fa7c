#include "dppo/algo/update.hpp"

#include "dppo/core/distribution.hpp"
#include "dppo/core/returns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dppo::algo {

Optimizers Optimizers::for_agent(const Agent& agent, double learning_rate) {
  return {net::AdamState(agent.actor.parameter_count() + agent.head.dim(), learning_rate),
          net::AdamState(agent.critic.parameter_count(), learning_rate)};
}

LossAndGrad actor_loss(const Agent& agent, const Eigen::MatrixXd& observations, const Eigen::MatrixXd& actions,
                       const Eigen::VectorXd& old_log_probs, const Eigen::VectorXd& advantages, double epsilon,
                       double entropy_coef) {
  const Eigen::Index batch = observations.cols();
  const double inv_b = 1.0 / static_cast<double>(batch);
  net::ForwardCache<double> cache;
  const Eigen::MatrixXd means = agent.actor.forward(observations, &cache);

  Eigen::MatrixXd d_means(means.rows(), batch);
  Eigen::VectorXd d_log_std = Eigen::VectorXd::Zero(agent.head.dim());
  LossAndGrad out;
  double objective = 0.0;
  Eigen::Index clipped = 0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto lp = net::policy_logprob_and_grad(agent.head, means.col(b), actions.col(b));
    const double log_ratio = lp.logp - old_log_probs(b);
    const double ratio = std::exp(log_ratio);
    objective += clip_objective(ratio, advantages(b), epsilon);
    if (std::abs(ratio - 1.0) > epsilon) ++clipped;
    out.approx_kl += (ratio - 1.0) - log_ratio;
    // d(-obj/B)/d logp = -(slope * ratio) / B
    const double coeff = -clip_objective_slope(ratio, advantages(b), epsilon) * ratio * inv_b;
    d_means.col(b) = coeff * lp.d_mean;
    d_log_std += coeff * lp.d_log_std;
  }
  out.loss = -objective * inv_b - entropy_coef * agent.head.entropy();
  d_log_std.array() -= entropy_coef;
  out.approx_kl *= inv_b;
  out.clip_fraction = static_cast<double>(clipped) * inv_b;

  const net::Mlp<double> g = agent.actor.backward(cache, d_means);
  const Eigen::VectorXd g_mlp = g.flatten();
  out.grad.resize(g_mlp.size() + d_log_std.size());
  out.grad << g_mlp, d_log_std;
  return out;
}

LossAndGrad distributional_critic_loss(const Agent& agent, const Eigen::MatrixXd& observations,
                                       const Eigen::MatrixXd& targets, CriticLoss kind, double kappa) {
  const Eigen::Index batch = observations.cols();
  const double inv_b = 1.0 / static_cast<double>(batch);
  net::ForwardCache<double> cache;
  const Eigen::MatrixXd pred = agent.value_scale * agent.critic.forward(agent.critic_input(observations), &cache);
  if (targets.cols() != batch) throw std::invalid_argument("distributional_critic_loss: target count mismatch");

  Eigen::MatrixXd d_pred(pred.rows(), batch);
  Eigen::VectorXd g(pred.rows());
  LossAndGrad out;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double l = kind == CriticLoss::energy ? energy_distance_grad(pred.col(b), targets.col(b), g)
                                                : quantile_huber_loss_grad(pred.col(b), targets.col(b), kappa, g);
    out.loss += l * inv_b;
    d_pred.col(b) = g * (inv_b * agent.value_scale);
  }
  out.grad = agent.critic.backward(cache, d_pred).flatten();
  return out;
}

LossAndGrad scalar_critic_loss(const Agent& agent, const Eigen::MatrixXd& observations,
                               const Eigen::VectorXd& returns) {
  const Eigen::Index batch = observations.cols();
  net::ForwardCache<double> cache;
  const Eigen::MatrixXd pred = agent.value_scale * agent.critic.forward(agent.critic_input(observations), &cache);
  const Eigen::RowVectorXd err = pred.row(0) - returns.transpose();
  LossAndGrad out;
  out.loss = err.squaredNorm() / static_cast<double>(batch);
  const Eigen::MatrixXd d_pred = (2.0 * agent.value_scale / static_cast<double>(batch)) * err;
  out.grad = agent.critic.backward(cache, d_pred).flatten();
  return out;
}

AdvantageEstimate estimate_advantages(const Rollout& rollout, const Eigen::VectorXd& values,
                                      const Eigen::VectorXd& bootstrap_values, double gamma, double lambda_gae) {
  const Eigen::Index t_len = rollout.horizon;
  AdvantageEstimate out;
  out.advantages.resize(rollout.samples());
  out.values = values;
  for (Eigen::Index l = 0; l < rollout.lanes; ++l) {
    const Eigen::Index start = rollout.index(l, 0);
    Eigen::VectorXd v(t_len + 1);
    v.head(t_len) = values.segment(start, t_len);
    v(t_len) = bootstrap_values(l);
    const std::vector<bool> dones(rollout.dones.begin() + start, rollout.dones.begin() + start + t_len);
    const Eigen::VectorXd r = rollout.rewards.segment(start, t_len);
    const auto batch = truncated_gae<double>(r, dones, v, gamma, lambda_gae);
    out.advantages.segment(start, t_len) = batch.advantages;
  }
  out.returns = out.advantages + out.values;
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_risk_values(const Rollout& rollout, const Agent& agent) {
  Eigen::VectorXd values(rollout.samples());
  Eigen::VectorXd boot(rollout.lanes);
  const bool distributional = agent.distributional();
  for (Eigen::Index s = 0; s < rollout.samples(); ++s) {
    values(s) = distributional
                    ? distorted_value(rollout.critic_outputs.col(s), agent.conditioning.metric_at(rollout.betas(s)))
                    : rollout.critic_outputs(0, s);
  }
  for (Eigen::Index l = 0; l < rollout.lanes; ++l) {
    const double beta = rollout.betas(rollout.index(l, rollout.horizon - 1));
    boot(l) = distributional ? distorted_value(rollout.bootstrap.col(l), agent.conditioning.metric_at(beta))
                             : rollout.bootstrap(0, l);
  }
  return {values, boot};
}

Eigen::MatrixXd sr_targets(const Rollout& rollout, double sr_lambda, double gamma, std::mt19937_64& rng) {
  const Eigen::Index t_len = rollout.horizon;
  Eigen::MatrixXd out(rollout.critic_outputs.rows(), rollout.samples());
  for (Eigen::Index l = 0; l < rollout.lanes; ++l) {
    const Eigen::Index start = rollout.index(l, 0);
    const std::vector<bool> dones(rollout.dones.begin() + start, rollout.dones.begin() + start + t_len);
    const Eigen::VectorXd r = rollout.rewards.segment(start, t_len);
    const Eigen::MatrixXd next = rollout.next_critic_outputs(l);
    out.middleCols(start, t_len) = sr_lambda_targets<double>(r, dones, next, sr_lambda, gamma, rng).atoms;
  }
  return out;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& v) {
  if (v.size() < 2) return v;
  const double mu = v.mean();
  const double sd = std::sqrt((v.array() - mu).square().sum() / static_cast<double>(v.size()));
  return ((v.array() - mu) / (sd + 1e-8)).matrix();
}

void clip_gradient(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / norm;
}

namespace {

template <typename CriticStep>
UpdateStats run_epochs(const Rollout& rollout, Agent& agent, Optimizers& opt, const DppoConfig& cfg,
                       std::mt19937_64& rng, const Eigen::VectorXd& advantages, CriticStep&& critic_step) {
  const Eigen::Index total = rollout.samples();
  const Eigen::Index mb_count = std::min<Eigen::Index>(cfg.minibatches, total);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  UpdateStats stats;
  int steps = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index mb = 0; mb < mb_count; ++mb) {
      const Eigen::Index begin = mb * total / mb_count;
      const Eigen::Index end = (mb + 1) * total / mb_count;
      const std::vector<Eigen::Index> idx(order.begin() + begin, order.begin() + end);

      const Eigen::MatrixXd obs = rollout.observations(Eigen::all, idx);
      const Eigen::MatrixXd act = rollout.actions(Eigen::all, idx);
      const Eigen::VectorXd old_lp = rollout.log_probs(idx);
      const Eigen::VectorXd adv = advantages(idx);

      LossAndGrad a = actor_loss(agent, obs, act, old_lp, adv, cfg.clip_epsilon, cfg.entropy_coef);
      LossAndGrad c = critic_step(obs, idx);
      if (!std::isfinite(a.loss) || !std::isfinite(c.loss)) {
        throw std::runtime_error("non-finite loss (policy " + std::to_string(a.loss) + ", critic " +
                                 std::to_string(c.loss) + ") at epoch " + std::to_string(epoch) + ", minibatch " +
                                 std::to_string(mb));
      }
      clip_gradient(a.grad, cfg.max_grad_norm);
      clip_gradient(c.grad, cfg.max_grad_norm);

      Eigen::VectorXd actor_params = agent.actor_parameters();
      net::adam_step(opt.actor, actor_params, a.grad);
      agent.assign_actor_parameters(actor_params);
      Eigen::VectorXd critic_params = agent.critic.flatten();
      net::adam_step(opt.critic, critic_params, c.grad);
      agent.critic.assign(critic_params);

      stats.policy_loss += a.loss;
      stats.critic_loss += c.loss;
      stats.approx_kl += a.approx_kl;
      stats.clip_fraction += a.clip_fraction;
      ++steps;
    }
  }
  const double inv = 1.0 / static_cast<double>(std::max(steps, 1));
  stats.policy_loss *= inv;
  stats.critic_loss *= inv;
  stats.approx_kl *= inv;
  stats.clip_fraction *= inv;
  return stats;
}

}  // namespace

UpdateStats dppo_update(const Rollout& rollout, Agent& agent, Optimizers& opt, const DppoConfig& cfg,
                        std::mt19937_64& rng) {
  if (!agent.distributional()) throw std::invalid_argument("dppo_update: agent has a scalar critic");
  const auto [values, boot] = sample_risk_values(rollout, agent);
  const AdvantageEstimate est = estimate_advantages(rollout, values, boot, cfg.gamma, cfg.lambda_gae);
  const Eigen::VectorXd adv = cfg.normalize_advantages ? normalize(est.advantages) : est.advantages;
  const Eigen::MatrixXd targets = sr_targets(rollout, cfg.sr_lambda, cfg.gamma, rng);

  return run_epochs(rollout, agent, opt, cfg, rng, adv, [&](const Eigen::MatrixXd& obs, const std::vector<Eigen::Index>& idx) {
    const Eigen::MatrixXd t = targets(Eigen::all, idx);
    return distributional_critic_loss(agent, obs, t, cfg.critic_loss, cfg.huber_kappa);
  });
}

UpdateStats ppo_update(const Rollout& rollout, Agent& agent, Optimizers& opt, const DppoConfig& cfg,
                       std::mt19937_64& rng) {
  if (agent.distributional()) throw std::invalid_argument("ppo_update: agent has a distributional critic");
  const auto [values, boot] = sample_risk_values(rollout, agent);
  const AdvantageEstimate est = estimate_advantages(rollout, values, boot, cfg.gamma, cfg.lambda_gae);
  const Eigen::VectorXd adv = cfg.normalize_advantages ? normalize(est.advantages) : est.advantages;

  return run_epochs(rollout, agent, opt, cfg, rng, adv, [&](const Eigen::MatrixXd& obs, const std::vector<Eigen::Index>& idx) {
    const Eigen::VectorXd ret = est.returns(idx);
    return scalar_critic_loss(agent, obs, ret);
  });
}

}  // namespace dppo::algo
