#include "dppo/algo/shaping.hpp"

#include "dppo/core/distribution.hpp"

#include <stdexcept>
#include <string>

namespace dppo::algo {

double ppo1_shaped_reward(const envs::RewardTerms& terms, double beta, std::string_view tracking_term) {
  double total = 0.0;
  bool found = false;
  for (const auto& term : terms) {
    if (term.name == tracking_term) {
      total += beta * term.value;
      found = true;
    } else {
      total += term.value;
    }
  }
  if (!found) throw std::invalid_argument("ppo1_shaped_reward: missing reward term '" + std::string(tracking_term) + "'");
  return total;
}

double ppo2_shaped_reward(const envs::RewardTerms& terms, double beta) {
  if (terms.empty()) throw std::invalid_argument("ppo2_shaped_reward: no reward terms");
  if (beta == 0.0) {
    double sum = 0.0;
    for (const auto& term : terms) sum += term.value;
    return sum;
  }
  Eigen::VectorXd values(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t i = 0; i < terms.size(); ++i) values(static_cast<Eigen::Index>(i)) = terms[i].value;
  return static_cast<double>(terms.size()) * distorted_value(values, RiskMetric::wang(beta));
}

}  // namespace dppo::algo
