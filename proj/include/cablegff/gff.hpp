#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cablegff/graph.hpp"
#include "cablegff/potential.hpp"
#include "cablegff/rng.hpp"

namespace cablegff {

struct FieldSample {
  const WeightedGraph* domain = nullptr;
  std::vector<double> values;  // indexed by vertex id, 0 on the boundary
  std::uint64_t seed = 0;
  std::uint64_t sample_index = 0;

  double operator[](VertexId v) const noexcept { return values[v]; }
};

// Zero-boundary GFF with covariance g_U. Unit boxes are sampled through the
// sine transform (one transform per sample); any other graph through a sparse
// Cholesky factor P A P^T = L L^T as x = P^T L^{-T} z.
class GffSampler {
 public:
  explicit GffSampler(const WeightedGraph& graph);
  ~GffSampler();
  GffSampler(GffSampler&&) noexcept;
  GffSampler& operator=(GffSampler&&) noexcept;

  const WeightedGraph& graph() const noexcept;
  bool spectral() const noexcept;

  // Draws from stream (seed, stream_id(sample_index, field)).
  FieldSample sample(std::uint64_t seed, std::uint64_t sample_index) const;
  // Interior values in interior_index order.
  void sample_interior(CounterRng& rng, std::span<double> out) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Resample the field off K given its values on K: harmonic extension of
// field|_K plus an independent zero-boundary GFF on U \ K. The latter is
// produced as xi - h_K^xi for a fresh GFF xi on U.
FieldSample conditional_resample(const GffSampler& sampler, const PotentialSolver& solver,
                                 const FieldSample& field, std::span<const VertexId> target,
                                 std::uint64_t sample_index);

// M_K = <e_K, phi>.
double cluster_functional_M(const FieldSample& field, const PotentialSolve& eq);

// Values of a Brownian bridge (variance 2 per unit length) on a cable of
// length 1/(2 weight) from `from` to `to`, at the points k/M of its length,
// k = 1..M-1. Needs M-1 standard normals.
void sample_bridge(double from, double to, double weight, std::span<const double> normals,
                   std::span<double> out);

}  // namespace cablegff
