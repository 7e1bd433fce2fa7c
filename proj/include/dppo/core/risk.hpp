#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <utility>

namespace dppo {

/// Distortion risk metrics supported by the critic read-out.
enum class RiskKind { neutral, cvar, wang };

std::string_view to_string(RiskKind kind);
RiskKind risk_kind_from_string(std::string_view name);

/// Closed interval of admissible risk parameters. `open_low` marks CVaR's
/// excluded zero.
struct BetaRange {
  double low = 0.0;
  double high = 0.0;
  bool open_low = false;

  bool contains(double beta) const {
    return (open_low ? beta > low : beta >= low) && beta <= high;
  }
  double clamp(double beta) const;
};

/// A risk preference: the distortion family and its parameter.
struct RiskMetric {
  RiskKind kind = RiskKind::neutral;
  double beta = 0.0;

  static RiskMetric neutral() { return {RiskKind::neutral, 0.0}; }
  static RiskMetric cvar(double beta) { return {RiskKind::cvar, beta}; }
  static RiskMetric wang(double beta) { return {RiskKind::wang, beta}; }

  /// Throws std::invalid_argument when beta is outside the metric's domain.
  void validate() const;
};

/// Range risk parameters are sampled from during training.
BetaRange training_range(RiskKind kind);
/// Range the steering session clamps to. Wider than the training range for Wang.
BetaRange evaluation_bounds(RiskKind kind);

/// Standard normal CDF.
double normal_cdf(double x);
/// Inverse standard normal CDF (Wichura AS241). Returns +-inf at 0 and 1.
double normal_quantile(double p);

/// g(tau) = Phi(Phi^-1(tau) + beta) with the end points pinned to 0 and 1.
double wang_g(double tau, double beta);
/// g(tau) = min(tau / beta, 1). Requires 0 < beta <= 1.
double cvar_g(double tau, double beta);
/// Distortion function of `metric` evaluated at tau.
double distortion(const RiskMetric& metric, double tau);

/// Weights w_k = g(k/n) - g((k-1)/n) applied to ascending-sorted atoms.
Eigen::VectorXd distortion_weights(const RiskMetric& metric, Eigen::Index n);

}  // namespace dppo
