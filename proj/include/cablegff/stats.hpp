#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace cablegff {

// P(N(0, variance) <= x).
inline double normal_cdf(double x, double variance = 1.0) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

inline double normal_pdf(double x, double variance = 1.0) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return kInvSqrt2Pi / std::sqrt(variance) * std::exp(-0.5 * x * x / variance);
}

// Welford accumulator.
class RunningStats {
 public:
  void add(double x) noexcept {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  void merge(const RunningStats& other) noexcept;

  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  double stderr_of_mean() const noexcept {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Proportion {
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;

  void add(bool hit) noexcept {
    ++trials;
    successes += hit ? 1 : 0;
  }
  double estimate() const noexcept {
    return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
  }
  double stderr_of_mean() const noexcept {
    if (trials == 0) return 0.0;
    const double p = estimate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  }
  // Wilson score interval at z standard deviations.
  std::pair<double, double> wilson(double z = 1.96) const noexcept;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

// Weighted least squares with weights 1/sigma^2.
LinearFit weighted_least_squares(std::span<const double> x,
                                 std::span<const double> y,
                                 std::span<const double> sigma);

struct ProportionalFit {
  double coefficient = 0.0;
  double r_squared = 0.0;
};

// y = c * x through the origin; R^2 relative to the mean of y.
ProportionalFit fit_through_origin(std::span<const double> x,
                                   std::span<const double> y);

// Standard error of the mean of a stationary series from `batches`
// contiguous batch averages.
double batch_means_stderr(std::span<const double> series, std::size_t batches);

struct RatioEstimate {
  double ratio = 0.0;
  double stderr_of_ratio = 0.0;
};

// Ratio of means sum(num)/sum(den) with a batch-means standard error.
RatioEstimate ratio_batch_means(std::span<const double> numerator,
                                std::span<const double> denominator,
                                std::size_t batches);

}  // namespace cablegff
