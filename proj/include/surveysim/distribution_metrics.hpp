// SPDX-License-Identifier: Apache-2.0
//
// Scalar measures between option distributions: Jensen-Shannon divergence
// (base 2, bounded in [0,1]), ordinal earth mover distance normalized by the
// option span, argmax accuracy, and cross-country diversity.
#pragma once

#include <span>
#include <string>
#include <vector>

namespace surveysim {

struct MetricValue {
  std::string name;
  double value = 0.0;
  bool higher_is_better = true;
};

/// Tolerance on the sum of an input distribution accepted by the metrics.
inline constexpr double kMetricSumTolerance = 1e-6;

/// Throws ValidationError unless `p` is non-empty, finite, non-negative and
/// sums to 1 within `tolerance`.
void validate_distribution(std::span<const double> p, double tolerance = kMetricSumTolerance);

/// Jensen-Shannon divergence with log base 2; 0·log(0/x) is taken as 0.
double jsd(std::span<const double> p, std::span<const double> q);

double one_minus_jsd(std::span<const double> p, std::span<const double> q);

/// Wasserstein-1 distance over option positions 0..n-1 with ground distance
/// |i-j|/(n-1). Requires n >= 2.
double emd(std::span<const double> p, std::span<const double> q);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> p);

/// Fraction of items whose prediction argmax matches the reference argmax.
double argmax_accuracy(const std::vector<std::vector<double>>& predictions,
                       const std::vector<std::vector<double>>& references);

/// Mean 1-JSD over all unordered pairs of the given distributions (one per
/// country, same question). Lower means more cross-country variation.
/// Throws ValidationError with fewer than two distributions.
double diversity_profile(const std::vector<std::vector<double>>& per_country);

}  // namespace surveysim
