#pragma once

#include "dppo/core/distribution.hpp"
#include "dppo/core/risk.hpp"
#include "dppo/envs/environment.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace dppo::envs {

/// Policy handed to the oracle. Only deterministic policies can be enumerated.
struct PolicyFn {
  std::function<Action(const Observation&)> act;
  bool stochastic = false;
};

struct ReturnAtom {
  double value;
  double probability;
};

struct OracleOptions {
  Eigen::Index num_atoms = 32;
  std::size_t max_branches = std::size_t{1} << 20;
  double gamma = 1.0;  // 1 = undiscounted episode return
  std::size_t monte_carlo_episodes = 1'000'000;
  std::uint64_t seed = 0;
};

struct OracleResult {
  /// Ascending returns with their probabilities (empirical when sampled).
  std::vector<ReturnAtom> atoms;
  QuantileDistribution<double> quantiles{0.0};
  bool monte_carlo = false;
  std::size_t branches = 0;

  double expected() const;
};

/// Return distribution of `policy` from the environment's start state(s):
/// exact enumeration of the outcome tree, or Monte Carlo when the tree has
/// more than `max_branches` leaves. Throws for stochastic policies.
OracleResult oracle_return_distribution(const Environment& env, const PolicyFn& policy, double risk_feature,
                                        const OracleOptions& options = {});

/// Midpoint-quantile compression: atom i is the (2i+1)/(2n) quantile.
QuantileDistribution<double> quantile_compress(const std::vector<ReturnAtom>& atoms, Eigen::Index n);

/// Distorted expectation of a discrete distribution,
/// sum_k (g(F_k) - g(F_{k-1})) z_k over ascending atoms.
double distorted_value(const std::vector<ReturnAtom>& atoms, const RiskMetric& metric);

/// Canonical scripted policies: "safe", "risky" (risky-cliff), "refuse",
/// "attempt" (gap-step).
PolicyFn scripted_policy(std::string_view name);

}  // namespace dppo::envs
