// SPDX-License-Identifier: Apache-2.0
#include "surveysim/distribution_metrics.hpp"

#include <cmath>
#include <sstream>

#include "surveysim/errors.hpp"

namespace surveysim {

namespace {

void require_same_length(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    std::ostringstream os;
    os << "distribution length mismatch: " << p.size() << " vs " << q.size();
    throw ValidationError(os.str());
  }
}

// Σ a_i log2(a_i / m_i) with the 0·log 0 convention.
double kl_to_mixture(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] <= 0.0) continue;
    const double m = 0.5 * (a[i] + b[i]);
    sum += a[i] * std::log2(a[i] / m);
  }
  return sum;
}

}  // namespace

void validate_distribution(std::span<const double> p, double tolerance) {
  if (p.empty()) throw ValidationError("empty distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v)) throw ValidationError("non-finite probability");
    if (v < 0.0) throw ValidationError("negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    std::ostringstream os;
    os.precision(12);
    os << "distribution not normalized: sum=" << sum;
    throw ValidationError(os.str());
  }
}

double jsd(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q);
  validate_distribution(p);
  validate_distribution(q);
  const double d = 0.5 * kl_to_mixture(p, q) + 0.5 * kl_to_mixture(q, p);
  // Rounding can push the value a hair outside the bound.
  if (d < 0.0) return 0.0;
  if (d > 1.0) return 1.0;
  return d;
}

double one_minus_jsd(std::span<const double> p, std::span<const double> q) {
  return 1.0 - jsd(p, q);
}

double emd(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q);
  if (p.size() < 2) throw ValidationError("emd needs at least two options");
  validate_distribution(p);
  validate_distribution(q);
  double cdf_p = 0.0;
  double cdf_q = 0.0;
  double work = 0.0;
  // The last CDF difference is zero for normalized inputs, so it is skipped.
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    cdf_p += p[i];
    cdf_q += q[i];
    work += std::abs(cdf_p - cdf_q);
  }
  const double d = work / static_cast<double>(p.size() - 1);
  return d > 1.0 ? 1.0 : d;
}

std::size_t argmax(std::span<const double> p) {
  if (p.empty()) throw ValidationError("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

double argmax_accuracy(const std::vector<std::vector<double>>& predictions,
                       const std::vector<std::vector<double>>& references) {
  if (predictions.empty()) throw ValidationError("argmax_accuracy on empty list");
  if (predictions.size() != references.size()) {
    throw ValidationError("argmax_accuracy: prediction/reference count mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    require_same_length(predictions[i], references[i]);
    if (argmax(predictions[i]) == argmax(references[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double diversity_profile(const std::vector<std::vector<double>>& per_country) {
  if (per_country.size() < 2) {
    throw ValidationError("diversity needs at least two countries");
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < per_country.size(); ++a) {
    for (std::size_t b = a + 1; b < per_country.size(); ++b) {
      sum += one_minus_jsd(per_country[a], per_country[b]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace surveysim
