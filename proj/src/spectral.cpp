#include "cablegff/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "cablegff/rng.hpp"

namespace cablegff {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_real(n)) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  double* data;
};

}  // namespace

BoxSpectrum::BoxSpectrum(const LatticeGeometry& geometry)
    : dimension_(geometry.dimension), side_(2 * geometry.half_side - 1) {
  if (side_ < 1) throw std::invalid_argument("box has no interior");
  size_ = 1;
  for (int i = 0; i < dimension_; ++i) size_ *= static_cast<std::size_t>(side_);

  // mu_k = sum_i 2(1 - cos(pi k_i / (n+1))), k_i = 1..n
  std::vector<double> axis(static_cast<std::size_t>(side_));
  for (int k = 0; k < side_; ++k)
    axis[static_cast<std::size_t>(k)] =
        2.0 * (1.0 - std::cos(std::numbers::pi * (k + 1) / (side_ + 1)));
  // Two unnormalised transforms multiply by (2(n+1))^d; one by its root.
  const double norm2 = std::pow(2.0 * (side_ + 1), dimension_);
  const double norm1 = std::sqrt(norm2);
  inverse_eigenvalues_.resize(size_);
  sample_scale_.resize(size_);
  std::vector<int> k(static_cast<std::size_t>(dimension_), 0);
  for (std::size_t i = 0; i < size_; ++i) {
    double mu = 0;
    for (int a : k) mu += axis[static_cast<std::size_t>(a)];
    inverse_eigenvalues_[i] = 1.0 / (mu * norm2);
    sample_scale_[i] = 1.0 / (std::sqrt(mu) * norm1);
    for (int axis_i = dimension_ - 1; axis_i >= 0; --axis_i) {
      if (++k[static_cast<std::size_t>(axis_i)] < side_) break;
      k[static_cast<std::size_t>(axis_i)] = 0;
    }
  }

  std::vector<int> dims(static_cast<std::size_t>(dimension_), side_);
  std::vector<fftw_r2r_kind> kinds(static_cast<std::size_t>(dimension_), FFTW_RODFT00);
  FftwBuffer scratch(size_);
  std::lock_guard lock(planner_mutex());
  plan_ = fftw_plan_r2r(dimension_, dims.data(), scratch.data, scratch.data,
                        kinds.data(), FFTW_ESTIMATE);
  if (!plan_) throw std::runtime_error("fftw planning failed");
}

BoxSpectrum::~BoxSpectrum() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void BoxSpectrum::transform(double* data) const {
  fftw_execute_r2r(static_cast<fftw_plan>(plan_), data, data);
}

void BoxSpectrum::apply_inverse(std::span<double> values) const {
  if (values.size() != size_) throw std::invalid_argument("size mismatch");
  FftwBuffer buf(size_);
  std::copy(values.begin(), values.end(), buf.data);
  transform(buf.data);
  for (std::size_t i = 0; i < size_; ++i) buf.data[i] *= inverse_eigenvalues_[i];
  transform(buf.data);
  std::copy(buf.data, buf.data + size_, values.begin());
}

void BoxSpectrum::sample(CounterRng& rng, std::span<double> out) const {
  if (out.size() != size_) throw std::invalid_argument("size mismatch");
  FftwBuffer buf(size_);
  for (std::size_t i = 0; i < size_; ++i) buf.data[i] = rng.normal() * sample_scale_[i];
  transform(buf.data);
  std::copy(buf.data, buf.data + size_, out.begin());
}

void BoxSpectrum::apply_laplacian(std::span<const double> in,
                                  std::span<double> out) const {
  if (in.size() != size_ || out.size() != size_)
    throw std::invalid_argument("size mismatch");
  const double diag = 2.0 * dimension_;
  for (std::size_t i = 0; i < size_; ++i) out[i] = diag * in[i];
  std::size_t stride = 1;
  for (int axis = dimension_ - 1; axis >= 0; --axis) {
    const std::size_t block = stride * static_cast<std::size_t>(side_);
    for (std::size_t base = 0; base < size_; base += block) {
      for (std::size_t j = 0; j + 1 < static_cast<std::size_t>(side_); ++j) {
        const std::size_t lo = base + j * stride;
        for (std::size_t t = 0; t < stride; ++t) {
          out[lo + t] -= in[lo + t + stride];
          out[lo + t + stride] -= in[lo + t];
        }
      }
    }
    stride = block;
  }
}

double BoxSpectrum::green_eigensum(std::span<const int> x,
                                   std::span<const int> y) const {
  // Orthonormal eigenvectors prod_i sqrt(2/(n+1)) sin(pi k_i j_i/(n+1)),
  // j_i = coordinate + (n+1)/2 in 1..n.
  const int n = side_;
  const int shift = (n + 1) / 2;
  std::vector<std::vector<double>> factor(static_cast<std::size_t>(dimension_),
                                          std::vector<double>(static_cast<std::size_t>(n)));
  for (int i = 0; i < dimension_; ++i) {
    const int jx = x[static_cast<std::size_t>(i)] + shift;
    const int jy = y[static_cast<std::size_t>(i)] + shift;
    for (int k = 1; k <= n; ++k) {
      const double w = std::numbers::pi * k / (n + 1);
      factor[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)] =
          2.0 / (n + 1) * std::sin(w * jx) * std::sin(w * jy);
    }
  }
  std::vector<double> axis(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    axis[static_cast<std::size_t>(k)] = 2.0 * (1.0 - std::cos(std::numbers::pi * (k + 1) / (n + 1)));
  double total = 0;
  std::vector<int> k(static_cast<std::size_t>(dimension_), 0);
  for (std::size_t idx = 0; idx < size_; ++idx) {
    double mu = 0, num = 1;
    for (int i = 0; i < dimension_; ++i) {
      const auto ki = static_cast<std::size_t>(k[static_cast<std::size_t>(i)]);
      mu += axis[ki];
      num *= factor[static_cast<std::size_t>(i)][ki];
    }
    total += num / mu;
    for (int i = dimension_ - 1; i >= 0; --i) {
      if (++k[static_cast<std::size_t>(i)] < n) break;
      k[static_cast<std::size_t>(i)] = 0;
    }
  }
  return total;
}

}  // namespace cablegff
