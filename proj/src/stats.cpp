#include "cablegff/stats.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cablegff {

void RunningStats::merge(const RunningStats& other) noexcept {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double total = static_cast<double>(n_ + other.n_);
  const double delta = other.mean_ - mean_;
  mean_ += delta * static_cast<double>(other.n_) / total;
  m2_ += other.m2_ + delta * delta * static_cast<double>(n_) *
                         static_cast<double>(other.n_) / total;
  n_ += other.n_;
}

std::pair<double, double> Proportion::wilson(double z) const noexcept {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = estimate();
  const double z2 = z * z;
  const double center = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  std::vector<double> ones(x.size(), 1.0);
  return weighted_least_squares(x, y, ones);
}

LinearFit weighted_least_squares(std::span<const double> x,
                                 std::span<const double> y,
                                 std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() != sigma.size())
    throw std::invalid_argument("fit inputs differ in length");
  if (x.size() < 2) throw std::invalid_argument("fit needs at least two points");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sxx += w * (x[i] - mx) * (x[i] - mx);
    sxy += w * (x[i] - mx) * (y[i] - my);
    syy += w * (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) throw std::invalid_argument("fit abscissae are degenerate");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ss_res += w * r * r;
  }
  fit.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  const double dof = static_cast<double>(x.size()) - 2.0;
  fit.slope_stderr = dof > 0 ? std::sqrt(ss_res / dof / sxx) : 0.0;
  return fit;
}

ProportionalFit fit_through_origin(std::span<const double> x,
                                   std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("fit inputs differ in length or are empty");
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  if (sxx <= 0) throw std::invalid_argument("fit abscissae are all zero");
  ProportionalFit fit;
  fit.coefficient = sxy / sxx;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.coefficient * x[i];
    ss_res += r * r;
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double batch_means_stderr(std::span<const double> series, std::size_t batches) {
  if (batches < 2 || series.size() < batches)
    throw std::invalid_argument("batch means needs >= 2 batches of >= 1 sample");
  const std::size_t size = series.size() / batches;
  RunningStats means;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto first = series.begin() + static_cast<std::ptrdiff_t>(b * size);
    means.add(std::accumulate(first, first + static_cast<std::ptrdiff_t>(size), 0.0) /
              static_cast<double>(size));
  }
  return means.stderr_of_mean();
}

RatioEstimate ratio_batch_means(std::span<const double> numerator,
                                std::span<const double> denominator,
                                std::size_t batches) {
  if (numerator.size() != denominator.size())
    throw std::invalid_argument("ratio series differ in length");
  if (batches < 2 || numerator.size() < batches)
    throw std::invalid_argument("batch means needs >= 2 batches of >= 1 sample");
  const double total_num = std::accumulate(numerator.begin(), numerator.end(), 0.0);
  const double total_den = std::accumulate(denominator.begin(), denominator.end(), 0.0);
  RatioEstimate out;
  if (total_den == 0.0) return out;
  out.ratio = total_num / total_den;
  // Linearised ratio residuals, averaged per batch.
  const std::size_t size = numerator.size() / batches;
  const double mean_den = total_den / static_cast<double>(numerator.size());
  RunningStats residual;
  for (std::size_t b = 0; b < batches; ++b) {
    double r = 0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i)
      r += numerator[i] - out.ratio * denominator[i];
    residual.add(r / static_cast<double>(size) / mean_den);
  }
  out.stderr_of_ratio = residual.stderr_of_mean();
  return out;
}

}  // namespace cablegff
