#include "dppo/envs/oracle.hpp"

#include "dppo/envs/risky_cliff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

namespace dppo::envs {

double OracleResult::expected() const {
  double total = 0.0;
  for (const auto& a : atoms) total += a.value * a.probability;
  return total;
}

namespace {

struct Node {
  std::unique_ptr<Environment> env;
  Observation observation;
  double probability;
  double ret;
  double discount;
};

std::vector<ReturnAtom> merge(std::vector<ReturnAtom> atoms) {
  std::sort(atoms.begin(), atoms.end(), [](const ReturnAtom& a, const ReturnAtom& b) { return a.value < b.value; });
  std::vector<ReturnAtom> out;
  for (const auto& a : atoms) {
    if (!out.empty() && std::abs(out.back().value - a.value) <= 1e-9 * std::max(1.0, std::abs(a.value))) {
      out.back().probability += a.probability;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

// Returns false when the leaf budget is exhausted.
bool enumerate(const Environment& start, double start_probability, const PolicyFn& policy, const OracleOptions& opt,
               std::vector<ReturnAtom>& leaves) {
  std::vector<Node> stack;
  stack.push_back({start.clone(), start.observation(), start_probability, 0.0, 1.0});
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    const Action action = policy.act(node.observation);

    auto branch_env = node.env->clone();
    ForcedChance no(false);
    const StepResult base = node.env->step(action, no);

    std::vector<std::pair<std::unique_ptr<Environment>, StepResult>> children;
    std::vector<double> weights;
    if (const auto p = no.queried(); p && *p > 0.0) {
      ForcedChance yes(true);
      StepResult alt = branch_env->step(action, yes);
      if (*p < 1.0) {
        children.emplace_back(std::move(node.env), base);
        weights.push_back(1.0 - *p);
      }
      children.emplace_back(std::move(branch_env), std::move(alt));
      weights.push_back(*p);
    } else {
      children.emplace_back(std::move(node.env), base);
      weights.push_back(1.0);
    }

    for (std::size_t c = 0; c < children.size(); ++c) {
      auto& [env, result] = children[c];
      const double prob = node.probability * weights[c];
      const double ret = node.ret + node.discount * result.reward;
      if (result.done()) {
        leaves.push_back({ret, prob});
        if (leaves.size() > opt.max_branches) return false;
      } else {
        stack.push_back({std::move(env), result.observation, prob, ret, node.discount * opt.gamma});
      }
    }
  }
  return true;
}

}  // namespace

QuantileDistribution<double> quantile_compress(const std::vector<ReturnAtom>& atoms, Eigen::Index n) {
  if (atoms.empty() || n < 1) throw std::invalid_argument("quantile_compress: empty distribution");
  Eigen::VectorXd q(n);
  std::size_t k = 0;
  double cumulative = atoms.front().probability;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double tau = (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(n));
    while (k + 1 < atoms.size() && cumulative < tau - 1e-12) {
      ++k;
      cumulative += atoms[k].probability;
    }
    q(i) = atoms[k].value;
  }
  return QuantileDistribution<double>(std::move(q));
}

double distorted_value(const std::vector<ReturnAtom>& atoms, const RiskMetric& metric) {
  metric.validate();
  double total = 0.0, cumulative = 0.0, g_prev = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    cumulative += atoms[k].probability;
    const double g = k + 1 == atoms.size() ? 1.0 : distortion(metric, std::min(cumulative, 1.0));
    total += (g - g_prev) * atoms[k].value;
    g_prev = g;
  }
  return total;
}

OracleResult oracle_return_distribution(const Environment& env, const PolicyFn& policy, double risk_feature,
                                        const OracleOptions& options) {
  if (policy.stochastic) {
    throw std::invalid_argument("oracle_return_distribution: stochastic policies cannot be enumerated");
  }
  if (!policy.act) throw std::invalid_argument("oracle_return_distribution: empty policy");

  auto starts = env.reset_branches();
  std::vector<ReturnAtom> leaves;
  bool exact = true;
  for (auto& [probability, start] : starts) {
    start->set_risk_feature(risk_feature);
    start->reset();
    if (!enumerate(*start, probability, policy, options, leaves)) {
      exact = false;
      break;
    }
  }

  OracleResult result;
  if (exact) {
    result.branches = leaves.size();
    result.atoms = merge(std::move(leaves));
  } else {
    // Sample start states in proportion to their weights.
    std::mt19937_64 rng(options.seed);
    std::vector<double> w;
    for (const auto& s : starts) w.push_back(s.first);
    std::discrete_distribution<std::size_t> pick_start(w.begin(), w.end());
    std::map<double, std::size_t> counts;
    for (std::size_t e = 0; e < options.monte_carlo_episodes; ++e) {
      auto sim = starts[pick_start(rng)].second->clone();
      sim->set_risk_feature(risk_feature);
      Observation obs = sim->reset();
      RngChance chance(rng);
      double ret = 0.0, discount = 1.0;
      for (;;) {
        const StepResult r = sim->step(policy.act(obs), chance);
        ret += discount * r.reward;
        discount *= options.gamma;
        if (r.done()) break;
        obs = r.observation;
      }
      ++counts[ret];
    }
    const double inv = 1.0 / static_cast<double>(options.monte_carlo_episodes);
    std::vector<ReturnAtom> sampled;
    for (const auto& [value, count] : counts) sampled.push_back({value, static_cast<double>(count) * inv});
    result.atoms = merge(std::move(sampled));
    result.monte_carlo = true;
    result.branches = options.max_branches + 1;
  }
  result.quantiles = quantile_compress(result.atoms, options.num_atoms);
  return result;
}

PolicyFn scripted_policy(std::string_view name) {
  if (name == "safe") {
    return {[](const Observation&) { return Action(Eigen::Vector2d(1.0, 0.0)); }, false};
  }
  if (name == "risky") {
    // Straight down into the hazard strip, then full speed along it.
    return {[](const Observation& obs) {
              const double y = obs(1) * RiskyCliff::kHeight;
              return Action(y < RiskyCliff::kHazardY ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, -1.0));
            },
            false};
  }
  if (name == "refuse") {
    return {[](const Observation&) { return Action(Eigen::VectorXd::Zero(1)); }, false};
  }
  if (name == "attempt") {
    return {[](const Observation&) { return Action(Eigen::VectorXd::Ones(1)); }, false};
  }
  throw std::invalid_argument("unknown scripted policy '" + std::string(name) +
                              "' (expected safe, risky, refuse or attempt)");
}

}  // namespace dppo::envs
