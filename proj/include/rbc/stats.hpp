#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace rbc {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
    else comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) noexcept {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = neg_inf;
  for (double x : xs) m = std::max(m, x);
  if (m == neg_inf) return neg_inf;
  CompensatedSum s;
  for (double x : xs) s.add(std::exp(x - m));
  return m + std::log(s.value());
}

struct Interval {
  double low;
  double high;
};

/// Wilson score interval for k successes in n trials.
inline Interval wilson_interval(long k, long n, double z = 1.96) {
  if (n <= 0) return {0.0, 1.0};
  const double p = static_cast<double>(k) / static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(xs.size() - 1);
}

struct BatchEstimate {
  double mean;
  double stderr_;
  double n_effective;
};

/// Batch-means estimate of the mean of a correlated series. Trailing samples
/// that do not fill a whole batch are dropped.
inline BatchEstimate batch_means(std::span<const double> series, int batches = 32) {
  if (batches < 2) throw std::invalid_argument("need at least two batches");
  const std::size_t len = series.size() / static_cast<std::size_t>(batches);
  if (len == 0) throw std::invalid_argument("series shorter than the batch count");
  std::vector<double> bm(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b)
    bm[b] = mean(series.subspan(static_cast<std::size_t>(b) * len, len));
  const auto used = series.first(len * static_cast<std::size_t>(batches));
  const double m = mean(used);
  const double se = std::sqrt(variance(bm) / batches);
  const double var = variance(used);
  double neff = static_cast<double>(used.size());
  if (se > 0) neff = std::min(neff, var / (se * se));
  return {m, se, neff};
}

}  // namespace rbc
