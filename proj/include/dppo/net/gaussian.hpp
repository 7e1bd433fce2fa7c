#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <random>

namespace dppo::net {

/// Diagonal Gaussian action head with a state-independent log standard deviation.
template <typename Scalar = double>
struct GaussianHead {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static constexpr Scalar kMinLogStd = Scalar(-5);
  static constexpr Scalar kMaxLogStd = Scalar(2);

  Vector log_std;

  explicit GaussianHead(Eigen::Index dim = 0) : log_std(Vector::Zero(dim)) {}

  Eigen::Index dim() const { return log_std.size(); }
  void clamp() { log_std = log_std.cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd); }
  Vector std_dev() const { return log_std.array().exp().matrix(); }

  Scalar entropy() const {
    const Scalar c = Scalar(0.5) + Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    return static_cast<Scalar>(dim()) * c + log_std.sum();
  }

  template <typename Urbg>
  Vector sample(const Vector& mean, Urbg& rng) const {
    std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
    Vector a(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i) a(i) = mean(i) + std::exp(log_std(i)) * normal(rng);
    return a;
  }
};

/// Log density of `action` and its gradients with respect to the mean and
/// to log_std.
template <typename Scalar>
struct LogProbGrad {
  Scalar logp;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> d_mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> d_log_std;
};

template <typename Scalar, typename DerivedM, typename DerivedA>
LogProbGrad<Scalar> policy_logprob_and_grad(const GaussianHead<Scalar>& head,
                                            const Eigen::MatrixBase<DerivedM>& mean,
                                            const Eigen::MatrixBase<DerivedA>& action) {
  const auto inv_std = (-head.log_std.array()).exp();
  const auto z = ((action - mean).array() * inv_std).eval();
  LogProbGrad<Scalar> out;
  out.logp = Scalar(-0.5) * z.square().sum() - head.log_std.sum() -
             Scalar(0.5) * static_cast<Scalar>(head.dim()) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  out.d_mean = (z * inv_std).matrix();
  out.d_log_std = (z.square() - Scalar(1)).matrix();
  return out;
}

}  // namespace dppo::net
