#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cablegff/graph.hpp"

namespace cablegff {

class CounterRng;

// Sine-transform diagonalisation of the unit-weight Dirichlet Laplacian on
// the interior (2L-1)^d of a lattice box. Interior arrays are indexed by the
// graph's interior_index, which is the row-major order of the interior box.
class BoxSpectrum {
 public:
  explicit BoxSpectrum(const LatticeGeometry& geometry);
  ~BoxSpectrum();
  BoxSpectrum(const BoxSpectrum&) = delete;
  BoxSpectrum& operator=(const BoxSpectrum&) = delete;

  std::size_t size() const noexcept { return size_; }
  int interior_side() const noexcept { return side_; }
  int dimension() const noexcept { return dimension_; }

  // x <- L^{-1} x.
  void apply_inverse(std::span<double> values) const;
  // x <- L x (matrix-free stencil).
  void apply_laplacian(std::span<const double> in, std::span<double> out) const;
  // Centred Gaussian vector with covariance L^{-1}.
  void sample(CounterRng& rng, std::span<double> out) const;

  // g_U(x, y) as an explicit eigen-sum; O(size) per call.
  double green_eigensum(std::span<const int> x, std::span<const int> y) const;

 private:
  void transform(double* data) const;  // unnormalised DST-I in every axis

  int dimension_;
  int side_;
  std::size_t size_;
  std::vector<double> inverse_eigenvalues_;  // includes normalisation
  std::vector<double> sample_scale_;         // includes normalisation
  void* plan_ = nullptr;                     // fftw_plan
};

}  // namespace cablegff
