#include "dppo/core/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dppo {

std::string_view to_string(RiskKind kind) {
  switch (kind) {
    case RiskKind::neutral: return "neutral";
    case RiskKind::cvar: return "cvar";
    case RiskKind::wang: return "wang";
  }
  return "neutral";
}

RiskKind risk_kind_from_string(std::string_view name) {
  if (name == "neutral") return RiskKind::neutral;
  if (name == "cvar") return RiskKind::cvar;
  if (name == "wang") return RiskKind::wang;
  throw std::invalid_argument("unknown risk metric '" + std::string(name) +
                              "' (expected neutral, cvar or wang)");
}

double BetaRange::clamp(double beta) const {
  if (open_low && beta <= low) {
    // Smallest representable value inside the range.
    return std::nextafter(low, high);
  }
  return std::clamp(beta, low, high);
}

void RiskMetric::validate() const {
  if (!std::isfinite(beta)) {
    throw std::invalid_argument("risk parameter must be finite");
  }
  if (kind == RiskKind::cvar && !(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("CVaR risk parameter must lie in (0, 1], got " +
                                std::to_string(beta));
  }
}

BetaRange training_range(RiskKind kind) {
  switch (kind) {
    case RiskKind::cvar: return {0.0, 1.0, true};
    case RiskKind::wang: return {-1.5, 1.5, false};
    case RiskKind::neutral: break;
  }
  return {0.0, 0.0, false};
}

BetaRange evaluation_bounds(RiskKind kind) {
  switch (kind) {
    case RiskKind::cvar: return {0.01, 1.0, false};
    case RiskKind::wang: return {-3.0, 3.0, false};
    case RiskKind::neutral: break;
  }
  return {0.0, 0.0, false};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }

  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

double wang_g(double tau, double beta) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return 1.0;
  return normal_cdf(normal_quantile(tau) + beta);
}

double cvar_g(double tau, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("CVaR risk parameter must lie in (0, 1], got " +
                                std::to_string(beta));
  }
  return std::min(tau / beta, 1.0);
}

double distortion(const RiskMetric& metric, double tau) {
  switch (metric.kind) {
    case RiskKind::cvar: return cvar_g(tau, metric.beta);
    case RiskKind::wang: return wang_g(tau, metric.beta);
    case RiskKind::neutral: break;
  }
  return tau;
}

Eigen::VectorXd distortion_weights(const RiskMetric& metric, Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("distortion_weights: n must be >= 1");
  metric.validate();
  Eigen::VectorXd weights(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double previous = 0.0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    const double tau = k == n ? 1.0 : static_cast<double>(k) * inv_n;
    const double current = distortion(metric, tau);
    // g is non-decreasing; rounding in Phi can still produce -1e-17.
    weights(k - 1) = std::max(current - previous, 0.0);
    previous = current;
  }
  return weights;
}

}  // namespace dppo
