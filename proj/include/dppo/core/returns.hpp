#pragma once

#include "dppo/core/distribution.hpp"
#include "dppo/core/risk.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace dppo {

/// Per-step distributional targets; column t holds the N target atoms of step t.
template <typename Scalar = double>
struct TargetSet {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> atoms;

  Eigen::Index steps() const { return atoms.cols(); }
  Eigen::Index num_atoms() const { return atoms.rows(); }
};

/// Output of truncated GAE over one lane segment.
template <typename Scalar = double>
struct AdvantageBatch {
  VectorX<Scalar> advantages;
  VectorX<Scalar> values;     // V(s_t), t = 0..T-1
  VectorX<Scalar> residuals;  // delta_t

  /// Regression targets A_t + V(s_t) for a scalar baseline.
  VectorX<Scalar> returns() const { return advantages + values; }
};

/// Number of atoms swapped for bootstrap atoms at each backward step.
inline Eigen::Index replacement_count(double lambda, Eigen::Index num_atoms) {
  return static_cast<Eigen::Index>(std::lround((1.0 - lambda) * static_cast<double>(num_atoms)));
}

namespace detail {

inline void check_sr_arguments(Eigen::Index steps, std::size_t dones, Eigen::Index next_cols, double lambda,
                               double gamma) {
  if (static_cast<Eigen::Index>(dones) != steps || next_cols != steps) {
    throw std::invalid_argument("sr_lambda_targets: rewards, dones and next_atoms lengths differ");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("sr_lambda_targets: lambda must lie in [0, 1]");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("sr_lambda_targets: gamma must lie in (0, 1]");
  }
}

// Backward SR recursion. `replace(carry, bootstrap)` mixes the atoms of
// Z(s_{t+1}) into the propagated set before it is discounted and shifted.
template <typename Scalar, typename Replace>
TargetSet<Scalar> sr_recursion(const VectorX<Scalar>& rewards, const std::vector<bool>& dones,
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& next_atoms,
                               double gamma, Replace&& replace) {
  const Eigen::Index steps = rewards.size();
  const Scalar g = static_cast<Scalar>(gamma);
  TargetSet<Scalar> out;
  out.atoms.resize(next_atoms.rows(), steps);
  VectorX<Scalar> carry(next_atoms.rows());
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    if (dones[static_cast<std::size_t>(t)]) {
      carry.setZero();
    } else if (t == steps - 1) {
      carry = next_atoms.col(t);
    } else {
      carry = out.atoms.col(t + 1);
      replace(carry, next_atoms.col(t));
    }
    out.atoms.col(t) = (rewards(t) + g * carry.array()).matrix();
  }
  return out;
}

}  // namespace detail

/// Sample-replacement SR(lambda) targets for one lane segment of T steps.
///
/// `next_atoms` is N x T; column t holds the critic atoms of s_{t+1}, so the last
/// column is the bootstrap state s_T. Going backwards, the propagated set S_{t+1}
/// has round((1 - lambda) N) uniformly chosen atoms replaced by the atoms of
/// Z(s_{t+1}) at the same indices, then is discounted and shifted by r_t. The
/// final step bootstraps from Z(s_T) directly; terminal steps bootstrap zero.
template <typename Scalar, typename Urbg>
TargetSet<Scalar> sr_lambda_targets(const VectorX<Scalar>& rewards, const std::vector<bool>& dones,
                                    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& next_atoms,
                                    double lambda, double gamma, Urbg& rng) {
  detail::check_sr_arguments(rewards.size(), dones.size(), next_atoms.cols(), lambda, gamma);
  const Eigen::Index n = next_atoms.rows();
  const Eigen::Index swap = replacement_count(lambda, n);
  std::vector<Eigen::Index> index(static_cast<std::size_t>(n));
  return detail::sr_recursion(rewards, dones, next_atoms, gamma, [&](VectorX<Scalar>& carry, const auto& boot) {
    if (swap == n) {
      carry = boot;
      return;
    }
    // Partial Fisher-Yates: the first `swap` entries are a uniform draw
    // without replacement.
    std::iota(index.begin(), index.end(), Eigen::Index{0});
    for (Eigen::Index k = 0; k < swap; ++k) {
      std::uniform_int_distribution<Eigen::Index> pick(k, n - 1);
      std::swap(index[static_cast<std::size_t>(k)], index[static_cast<std::size_t>(pick(rng))]);
      const Eigen::Index idx = index[static_cast<std::size_t>(k)];
      carry(idx) = boot(idx);
    }
  });
}

/// Expectation of sr_lambda_targets over the replacement draws. Each atom is
/// replaced with probability round((1 - lambda) N) / N at every step, so the
/// expected carry is the matching convex blend of the two atom sets.
template <typename Scalar>
TargetSet<Scalar> sr_lambda_expected_targets(const VectorX<Scalar>& rewards, const std::vector<bool>& dones,
                                             const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& next_atoms,
                                             double lambda, double gamma) {
  detail::check_sr_arguments(rewards.size(), dones.size(), next_atoms.cols(), lambda, gamma);
  const Eigen::Index n = next_atoms.rows();
  const Scalar p = static_cast<Scalar>(replacement_count(lambda, n)) / static_cast<Scalar>(n);
  return detail::sr_recursion(rewards, dones, next_atoms, gamma, [&](VectorX<Scalar>& carry, const auto& boot) {
    carry = ((Scalar(1) - p) * carry.array() + p * boot.array()).matrix();
  });
}

/// Distorted value V_beta(s_t) of every column of `atoms`.
template <typename Scalar>
VectorX<Scalar> risk_values(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& atoms,
                            const RiskMetric& metric) {
  VectorX<Scalar> out(atoms.cols());
  for (Eigen::Index t = 0; t < atoms.cols(); ++t) out(t) = distorted_value(atoms.col(t), metric);
  return out;
}

/// Truncated GAE. `values` has T + 1 entries; the last one bootstraps the
/// segment cut by the rollout horizon. Accumulation resets at terminal flags.
template <typename Scalar>
AdvantageBatch<Scalar> truncated_gae(const VectorX<Scalar>& rewards, const std::vector<bool>& dones,
                                     const VectorX<Scalar>& values, double gamma, double lambda_gae) {
  const Eigen::Index steps = rewards.size();
  if (static_cast<Eigen::Index>(dones.size()) != steps || values.size() != steps + 1) {
    throw std::invalid_argument("truncated_gae: rewards, dones and values lengths differ");
  }
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0)) {
    throw std::invalid_argument("truncated_gae: lambda must lie in [0, 1]");
  }
  const Scalar g = static_cast<Scalar>(gamma);
  const Scalar gl = static_cast<Scalar>(gamma * lambda_gae);

  AdvantageBatch<Scalar> out;
  out.values = values.head(steps);
  out.advantages.resize(steps);
  out.residuals.resize(steps);
  Scalar running(0);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const Scalar live = dones[static_cast<std::size_t>(t)] ? Scalar(0) : Scalar(1);
    out.residuals(t) = rewards(t) + g * live * values(t + 1) - values(t);
    running = out.residuals(t) + gl * live * running;
    out.advantages(t) = running;
  }
  return out;
}

}  // namespace dppo
