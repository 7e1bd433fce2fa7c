#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace dppo::net {

struct GradCheckReport {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = -1;
  Eigen::Index checked = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  Eigen::Index max_coordinates = 512;
  /// Denominator floor: coordinates whose gradients are both below this are
  /// compared in absolute terms.
  double scale_floor = 1e-6;
  std::uint64_t seed = 0;
};

/// Compares `analytic` against central differences of `loss` at `params`.
/// Checks every coordinate, or a seeded sample of `max_coordinates` of them.
inline GradCheckReport grad_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                                  const Eigen::VectorXd& params, const Eigen::VectorXd& analytic,
                                  const GradCheckOptions& opts = {}) {
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(params.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (opts.max_coordinates > 0 && params.size() > opts.max_coordinates) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(opts.max_coordinates));
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  Eigen::VectorXd probe = params;
  for (Eigen::Index i : coords) {
    const double saved = probe(i);
    probe(i) = saved + opts.step;
    const double up = loss(probe);
    probe(i) = saved - opts.step;
    const double down = loss(probe);
    probe(i) = saved;
    const double numeric = (up - down) / (2.0 * opts.step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic(i)), opts.scale_floor});
    const double rel = std::abs(numeric - analytic(i)) / denom;
    if (report.worst_index < 0 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
    ++report.checked;
  }
  report.passed = report.max_relative_error < opts.tolerance;
  return report;
}

}  // namespace dppo::net
