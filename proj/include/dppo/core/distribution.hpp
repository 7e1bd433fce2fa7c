#pragma once

#include "dppo/core/risk.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>

namespace dppo {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Uniform mixture (1/N) sum_i delta(theta_i) over N finite atoms. Atom order
/// carries no meaning until sorted.
template <typename Scalar = double>
class QuantileDistribution {
 public:
  explicit QuantileDistribution(VectorX<Scalar> supports) : supports_(std::move(supports)) {
    if (supports_.size() < 1) {
      throw std::invalid_argument("QuantileDistribution needs at least one atom");
    }
    if (!supports_.allFinite()) {
      throw std::invalid_argument("QuantileDistribution atoms must be finite");
    }
  }

  QuantileDistribution(std::initializer_list<Scalar> atoms)
      : QuantileDistribution(from_list(atoms)) {}

  Eigen::Index size() const { return supports_.size(); }
  const VectorX<Scalar>& supports() const { return supports_; }

  VectorX<Scalar> sorted() const {
    VectorX<Scalar> out = supports_;
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static VectorX<Scalar> from_list(std::initializer_list<Scalar> atoms) {
    VectorX<Scalar> v(static_cast<Eigen::Index>(atoms.size()));
    std::copy(atoms.begin(), atoms.end(), v.begin());
    return v;
  }

  VectorX<Scalar> supports_;
};

QuantileDistribution(std::initializer_list<double>) -> QuantileDistribution<double>;

template <typename Scalar>
Scalar mean(const QuantileDistribution<Scalar>& dist) {
  return dist.supports().mean();
}

/// Distorted expectation: distortion weights applied to ascending-sorted atoms.
template <typename Derived>
typename Derived::Scalar distorted_value(const Eigen::MatrixBase<Derived>& atoms,
                                         const RiskMetric& metric) {
  using Scalar = typename Derived::Scalar;
  if (metric.kind == RiskKind::neutral) return atoms.mean();
  VectorX<Scalar> sorted = atoms;
  std::sort(sorted.begin(), sorted.end());
  const Eigen::VectorXd weights = distortion_weights(metric, sorted.size());
  return weights.cast<Scalar>().dot(sorted);
}

template <typename Scalar>
Scalar distorted_value(const QuantileDistribution<Scalar>& dist, const RiskMetric& metric) {
  return distorted_value(dist.supports(), metric);
}

/// Energy distance between two sample sets:
///   2 E|a_i - b_j| - E|b_i - b_j| - E|a_i - a_j|.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar energy_distance(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() == 0 || b.size() == 0) {
    throw std::invalid_argument("energy_distance: sample sets must be non-empty");
  }
  auto mean_abs_diff = [](const auto& x, const auto& y) {
    Scalar acc(0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      for (Eigen::Index j = 0; j < y.size(); ++j) acc += std::abs(x(i) - y(j));
    }
    return acc / static_cast<Scalar>(x.size() * y.size());
  };
  return Scalar(2) * mean_abs_diff(a, b) - mean_abs_diff(b, b) - mean_abs_diff(a, a);
}

/// Energy distance and its gradient with respect to the predicted set `pred`.
/// The target set is treated as a constant.
template <typename DerivedA, typename DerivedB, typename DerivedG>
typename DerivedA::Scalar energy_distance_grad(const Eigen::MatrixBase<DerivedA>& pred,
                                               const Eigen::MatrixBase<DerivedB>& target,
                                               const Eigen::MatrixBase<DerivedG>& grad_out) {
  using Scalar = typename DerivedA::Scalar;
  auto& grad = const_cast<Eigen::MatrixBase<DerivedG>&>(grad_out);
  const Eigen::Index n = pred.size();
  const Eigen::Index m = target.size();
  if (n == 0 || m == 0) {
    throw std::invalid_argument("energy_distance_grad: sample sets must be non-empty");
  }
  grad.derived().setZero(n);
  auto sign = [](Scalar v) { return Scalar((v > 0) - (v < 0)); };

  const Scalar cross_scale = Scalar(2) / static_cast<Scalar>(n * m);
  const Scalar self_scale = Scalar(1) / static_cast<Scalar>(n * n);
  Scalar cross(0), self_pred(0), self_target(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Scalar d = pred(i) - target(j);
      cross += std::abs(d);
      grad(i) += cross_scale * sign(d);
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar d = pred(i) - pred(j);
      self_pred += Scalar(2) * std::abs(d);
      // Each unordered pair appears twice in the double sum.
      const Scalar g = Scalar(2) * self_scale * sign(d);
      grad(i) -= g;
      grad(j) += g;
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) self_target += Scalar(2) * std::abs(target(i) - target(j));
  }
  return cross_scale * cross - self_target / static_cast<Scalar>(m * m) - self_scale * self_pred;
}

namespace detail {
template <typename Scalar>
Scalar huber(Scalar u, Scalar kappa) {
  const Scalar a = std::abs(u);
  return a <= kappa ? Scalar(0.5) * u * u : kappa * (a - Scalar(0.5) * kappa);
}
template <typename Scalar>
Scalar huber_slope(Scalar u, Scalar kappa) {
  return std::abs(u) <= kappa ? u : kappa * Scalar((u > 0) - (u < 0));
}
}  // namespace detail

/// Quantile-Huber loss of QR-DQN: mean over targets of
/// sum_i |tau_i - 1{u < 0}| * L_kappa(u) / kappa with u = t_j - theta_i and
/// tau_i = (2i - 1) / 2N. Atom i is tied to the i-th quantile midpoint, so atom
/// order matters here (unlike the energy distance).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar quantile_huber_loss(const Eigen::MatrixBase<DerivedA>& pred,
                                              const Eigen::MatrixBase<DerivedB>& target,
                                              typename DerivedA::Scalar kappa) {
  using Scalar = typename DerivedA::Scalar;
  if (!(kappa > 0)) throw std::invalid_argument("quantile_huber_loss: kappa must be > 0");
  const Eigen::Index n = pred.size();
  Scalar total(0);
  for (Eigen::Index j = 0; j < target.size(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar tau = (Scalar(2 * i + 1)) / Scalar(2 * n);
      const Scalar u = target(j) - pred(i);
      total += std::abs(tau - Scalar(u < 0)) * detail::huber(u, kappa) / kappa;
    }
  }
  return total / static_cast<Scalar>(target.size());
}

template <typename DerivedA, typename DerivedB, typename DerivedG>
typename DerivedA::Scalar quantile_huber_loss_grad(const Eigen::MatrixBase<DerivedA>& pred,
                                                   const Eigen::MatrixBase<DerivedB>& target,
                                                   typename DerivedA::Scalar kappa,
                                                   const Eigen::MatrixBase<DerivedG>& grad_out) {
  using Scalar = typename DerivedA::Scalar;
  auto& grad = const_cast<Eigen::MatrixBase<DerivedG>&>(grad_out);
  const Eigen::Index n = pred.size();
  grad.derived().setZero(n);
  const Scalar inv_m = Scalar(1) / static_cast<Scalar>(target.size());
  for (Eigen::Index j = 0; j < target.size(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar tau = (Scalar(2 * i + 1)) / Scalar(2 * n);
      const Scalar u = target(j) - pred(i);
      const Scalar w = std::abs(tau - Scalar(u < 0));
      // du/dtheta = -1
      grad(i) -= inv_m * w * detail::huber_slope(u, kappa) / kappa;
    }
  }
  return quantile_huber_loss(pred, target, kappa);
}

/// 1-Wasserstein distance between two equal-weight atom sets. Sets of unequal
/// size are compared through their quantile functions on the finer grid.
template <typename Scalar>
Scalar wasserstein1(const QuantileDistribution<Scalar>& a, const QuantileDistribution<Scalar>& b) {
  const VectorX<Scalar> sa = a.sorted();
  const VectorX<Scalar> sb = b.sorted();
  if (sa.size() == sb.size()) return (sa - sb).cwiseAbs().mean();

  // Integrate |F_a^-1 - F_b^-1| exactly over the merged breakpoints.
  const Scalar na = static_cast<Scalar>(sa.size());
  const Scalar nb = static_cast<Scalar>(sb.size());
  Eigen::Index i = 0, j = 0;
  Scalar tau(0), total(0);
  while (i < sa.size() && j < sb.size()) {
    const Scalar next_a = static_cast<Scalar>(i + 1) / na;
    const Scalar next_b = static_cast<Scalar>(j + 1) / nb;
    const Scalar next = std::min(next_a, next_b);
    total += (next - tau) * std::abs(sa(i) - sb(j));
    tau = next;
    if (next_a <= next) ++i;
    if (next_b <= next) ++j;
  }
  return total;
}

}  // namespace dppo
