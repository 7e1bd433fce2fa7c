#include "dppo/algo/trainer.hpp"

#include "dppo/envs/environment.hpp"

#include <chrono>
#include <cmath>

namespace dppo::algo {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

int beta_bucket(double beta, const BetaRange& range) {
  const double width = range.high - range.low;
  if (width <= 0.0) return 0;
  const int k = static_cast<int>(std::floor((beta - range.low) / width * kBetaBuckets));
  return std::clamp(k, 0, kBetaBuckets - 1);
}

Trainer::Trainer(DppoConfig cfg, std::string env_name, Algorithm algo)
    : cfg_(std::move(cfg)), env_name_(std::move(env_name)), algo_(algo), rng_(cfg_.seed) {
  cfg_.validate(algo_);
  range_ = resolved_beta_range(cfg_, algo_);
  const auto probe = envs::make_environment(env_name_);
  agent_ = Agent::initialise(probe->observation_dim(), probe->action_dim(), cfg_, algo_, rng_);
  opt_ = Optimizers::for_agent(agent_, cfg_.learning_rate);
  lanes_ = make_lanes(env_name_, cfg_.num_envs, rng_);
  started_ = now_seconds();
}

MetricsRecord Trainer::iterate() {
  const Rollout rollout = collect_rollouts(lanes_, agent_, range_, cfg_.horizon);
  UpdateStats stats;
  try {
    stats = agent_.distributional() ? dppo_update(rollout, agent_, opt_, cfg_, rng_)
                                    : ppo_update(rollout, agent_, opt_, cfg_, rng_);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("iteration " + std::to_string(iteration_ + 1) + ": " + e.what());
  }
  if (!agent_.actor.all_finite() || !agent_.critic.all_finite()) {
    throw std::runtime_error("iteration " + std::to_string(iteration_ + 1) + ": parameters became non-finite");
  }
  ++iteration_;
  env_steps_ += rollout.samples();

  MetricsRecord rec;
  rec.iteration = iteration_;
  rec.env_steps = env_steps_;
  rec.stats = stats;
  rec.wall_seconds = now_seconds() - started_;
  rec.episodes = static_cast<int>(rollout.episodes.size());
  if (!rollout.episodes.empty()) {
    double ret = 0.0, early = 0.0;
    std::array<double, kBetaBuckets> sum{};
    std::array<int, kBetaBuckets> count{};
    for (const auto& ep : rollout.episodes) {
      ret += ep.base_return;
      early += ep.early_termination ? 1.0 : 0.0;
      const int b = beta_bucket(ep.beta, range_);
      sum[b] += ep.base_return;
      ++count[b];
    }
    rec.mean_return = ret / rec.episodes;
    rec.early_termination = early / rec.episodes;
    for (int b = 0; b < kBetaBuckets; ++b) {
      if (count[b] > 0) rec.bucket_returns[b] = sum[b] / count[b];
    }
  }
  return rec;
}

Agent train(const DppoConfig& cfg, const std::string& env_name, Algorithm algo, const TrainCallbacks& callbacks) {
  Trainer trainer(cfg, env_name, algo);
  for (int i = 0; i < cfg.iterations; ++i) {
    const MetricsRecord rec = trainer.iterate();
    if (callbacks.on_metrics) callbacks.on_metrics(rec);
    if (callbacks.on_checkpoint && cfg.checkpoint_every > 0 && rec.iteration % cfg.checkpoint_every == 0 &&
        rec.iteration != cfg.iterations) {
      callbacks.on_checkpoint(trainer);
    }
  }
  if (callbacks.on_checkpoint) callbacks.on_checkpoint(trainer);
  return trainer.agent();
}

}  // namespace dppo::algo
