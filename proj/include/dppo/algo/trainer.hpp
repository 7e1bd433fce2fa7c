#pragma once

#include "dppo/algo/agent.hpp"
#include "dppo/algo/config.hpp"
#include "dppo/algo/rollout.hpp"
#include "dppo/algo/update.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dppo::algo {

inline constexpr int kBetaBuckets = 5;

struct MetricsRecord {
  int iteration = 0;
  std::int64_t env_steps = 0;
  int episodes = 0;
  /// Unset when no episode finished during the iteration.
  std::optional<double> mean_return;
  std::optional<double> early_termination;
  UpdateStats stats;
  double wall_seconds = 0.0;
  /// Mean episode return per equal-width bucket of the training beta range.
  std::array<std::optional<double>, kBetaBuckets> bucket_returns{};
};

/// Collect/update loop. Each call to `iterate` runs one rollout and one update.
class Trainer {
 public:
  Trainer(DppoConfig cfg, std::string env_name, Algorithm algo);

  MetricsRecord iterate();

  const Agent& agent() const { return agent_; }
  Agent& agent() { return agent_; }
  const DppoConfig& config() const { return cfg_; }
  Algorithm algorithm() const { return algo_; }
  const std::string& env_name() const { return env_name_; }
  int iteration() const { return iteration_; }
  std::int64_t env_steps() const { return env_steps_; }
  BetaRange beta_range() const { return range_; }

 private:
  DppoConfig cfg_;
  std::string env_name_;
  Algorithm algo_;
  BetaRange range_;
  std::mt19937_64 rng_;
  Agent agent_;
  Optimizers opt_;
  std::vector<Lane> lanes_;
  int iteration_ = 0;
  std::int64_t env_steps_ = 0;
  double started_ = 0.0;
};

struct TrainCallbacks {
  std::function<void(const MetricsRecord&)> on_metrics;
  /// Called every `checkpoint_every` iterations and once at the end.
  std::function<void(const Trainer&)> on_checkpoint;
};

/// Runs `cfg.iterations` iterations and returns the final agent.
Agent train(const DppoConfig& cfg, const std::string& env_name, Algorithm algo, const TrainCallbacks& callbacks = {});

/// Bucket index of `beta` within `range` (the closed top end goes to the last bucket).
int beta_bucket(double beta, const BetaRange& range);

}  // namespace dppo::algo
