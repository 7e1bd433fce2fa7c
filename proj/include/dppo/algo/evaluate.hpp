#pragma once

#include "dppo/algo/agent.hpp"
#include "dppo/envs/environment.hpp"
#include "dppo/envs/trajectory.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dppo::algo {

/// Sample mean and half-width of its normal-approximation 95% interval
/// (zero for a single sample).
struct Interval {
  double mean = 0.0;
  double ci95 = 0.0;
};

Interval mean_interval(const std::vector<double>& samples);

struct EvalRow {
  double beta = 0.0;
  int episodes = 0;
  Interval episode_return;
  Interval early_termination;
  Interval tracking_error;
  std::optional<double> risky_fraction;  // risky-cliff variants
  std::optional<double> refusal_rate;    // gap-step
  std::optional<double> failure_rate;
  std::optional<double> success_rate;
  std::optional<double> height;
};

struct EvalOptions {
  std::vector<double> betas;
  int episodes = 100;
  std::uint64_t seed = 0;
  /// Pins the gap-step obstacle height.
  std::optional<double> height;
};

/// `n` evenly spaced values on [lo, hi]; n = 1 gives {lo}.
std::vector<double> beta_grid(double lo, double hi, int n);

/// Parses "lo:hi:n".
std::vector<double> parse_beta_grid(const std::string& text);

std::unique_ptr<envs::Environment> make_eval_environment(const std::string& env_name, std::uint64_t seed,
                                                         std::optional<double> height);

/// Rolls the mean action of the policy for `episodes` episodes per beta.
/// Throws std::invalid_argument when a beta is invalid for the agent's metric.
std::vector<EvalRow> evaluate(const Agent& agent, const std::string& env_name, const EvalOptions& options);

/// One deterministic episode; returns the trajectory and the undiscounted return.
struct EpisodeOutcome {
  envs::Trajectory trajectory;
  double episode_return = 0.0;
  bool early_termination = false;
  int steps = 0;
  double progress = 0.0;
};
EpisodeOutcome run_episode(const Agent& agent, envs::Environment& env, double beta, std::uint64_t seed);

void to_json(nlohmann::json& j, const EvalRow& row);
void from_json(const nlohmann::json& j, EvalRow& row);

}  // namespace dppo::algo
