#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "percweb/error.hpp"

namespace percweb::stats {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Kolmogorov-Smirnov distance between the empirical law of `sample` and a
/// continuous cdf. Ties are handled by evaluating both one-sided gaps at
/// every distinct value.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) fail(ErrorCode::InvalidArgument, "empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0;
  std::size_t i = 0;
  while (i < sample.size()) {
    std::size_t j = i;
    while (j < sample.size() && sample[j] == sample[i]) ++j;
    const double f = cdf(sample[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(j) / n - f)});
    i = j;
  }
  return d;
}

inline double ks_normal(std::vector<double> sample) { return ks_statistic(std::move(sample), normal_cdf); }

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidArgument, "empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
      v = a[i];
    else
      v = b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic critical value of the two-sample KS distance at level alpha.
inline double ks_two_sample_critical(std::size_t na, std::size_t nb, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double a = static_cast<double>(na), b = static_cast<double>(nb);
  return c * std::sqrt((a + b) / (a * b));
}

struct Interval {
  double low = 0;
  double high = 0;
};

/// Wilson score interval for a binomial proportion; z = 1.96 by default.
inline Interval wilson(std::int64_t successes, std::int64_t n, double z = 1.96) {
  if (n <= 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double ph = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1 + z2 / nn;
  const double centre = (ph + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(ph * (1 - ph) / nn + z2 / (4 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Lag-1 sample autocorrelation.
inline double lag1_autocorrelation(std::span<const double> v) {
  if (v.size() < 3) fail(ErrorCode::InsufficientData, "need at least 3 values");
  const double m = mean(v);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    den += (v[i] - m) * (v[i] - m);
    if (i + 1 < v.size()) num += (v[i] - m) * (v[i + 1] - m);
  }
  if (den <= 0) fail(ErrorCode::DegenerateSample, "constant sequence");
  return num / den;
}

}  // namespace percweb::stats
