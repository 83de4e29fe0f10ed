#include "cablegff/gff.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>

#include "cablegff/spectral.hpp"

namespace cablegff {

struct GffSampler::Impl {
  const WeightedGraph* graph = nullptr;
  std::unique_ptr<BoxSpectrum> spectrum;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> factor;
};

GffSampler::GffSampler(const WeightedGraph& graph) : impl_(std::make_unique<Impl>()) {
  impl_->graph = &graph;
  if (graph.is_unit_lattice()) {
    impl_->spectrum = std::make_unique<BoxSpectrum>(*graph.lattice());
    return;
  }
  const std::size_t n = graph.interior_count();
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < n; ++i) {
    const VertexId v = graph.interior_vertex(i);
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), graph.vertex_weight(v));
    for (const Neighbor& nb : graph.neighbors(v)) {
      const auto j = graph.interior_index(nb.vertex);
      if (j >= 0) triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), -nb.weight);
    }
  }
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  a.setFromTriplets(triplets.begin(), triplets.end());
  impl_->factor.compute(a);
  if (impl_->factor.info() != Eigen::Success)
    throw SolverError("Cholesky factorization of the Dirichlet Laplacian failed", std::nan(""));
}

GffSampler::~GffSampler() = default;
GffSampler::GffSampler(GffSampler&&) noexcept = default;
GffSampler& GffSampler::operator=(GffSampler&&) noexcept = default;

const WeightedGraph& GffSampler::graph() const noexcept { return *impl_->graph; }
bool GffSampler::spectral() const noexcept { return impl_->spectrum != nullptr; }

void GffSampler::sample_interior(CounterRng& rng, std::span<double> out) const {
  if (out.size() != impl_->graph->interior_count())
    throw std::invalid_argument("output does not match the interior size");
  if (impl_->spectrum) {
    impl_->spectrum->sample(rng, out);
    return;
  }
  const auto n = static_cast<Eigen::Index>(out.size());
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  const Eigen::VectorXd y = impl_->factor.matrixU().solve(z);
  Eigen::Map<Eigen::VectorXd>(out.data(), n) = impl_->factor.permutationPinv() * y;
}

FieldSample GffSampler::sample(std::uint64_t seed, std::uint64_t sample_index) const {
  const WeightedGraph& g = *impl_->graph;
  FieldSample f;
  f.domain = &g;
  f.seed = seed;
  f.sample_index = sample_index;
  CounterRng rng(seed, stream_id(sample_index, StreamPurpose::field));
  std::vector<double> interior(g.interior_count());
  sample_interior(rng, interior);
  f.values.assign(g.vertex_count(), 0.0);
  for (std::size_t i = 0; i < interior.size(); ++i) f.values[g.interior_vertex(i)] = interior[i];
  return f;
}

FieldSample conditional_resample(const GffSampler& sampler, const PotentialSolver& solver,
                                 const FieldSample& field, std::span<const VertexId> target,
                                 std::uint64_t sample_index) {
  const WeightedGraph& g = sampler.graph();
  if (field.domain != &g || &solver.graph() != &g)
    throw std::invalid_argument("field, sampler and solver live on different domains");
  if (target.empty()) return sampler.sample(field.seed, sample_index);
  // Distinct stream from plain sampling at the same index.
  CounterRng rng(field.seed, stream_id(sample_index, StreamPurpose::conditional));
  std::vector<double> interior(g.interior_count());
  sampler.sample_interior(rng, interior);
  FieldSample fresh{&g, std::vector<double>(g.vertex_count(), 0.0), field.seed, sample_index};
  for (std::size_t i = 0; i < interior.size(); ++i) fresh.values[g.interior_vertex(i)] = interior[i];

  std::vector<double> given(target.size()), noise_on_k(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (!std::isfinite(field.values[target[k]]))
      throw std::invalid_argument("boundary data must be finite");
    given[k] = field.values[target[k]];
    noise_on_k[k] = fresh.values[target[k]];
  }
  const std::vector<double> mean = solver.harmonic_extension(target, given);
  const std::vector<double> correction = solver.harmonic_extension(target, noise_on_k);
  FieldSample out = fresh;
  for (VertexId v : g.interior_vertices())
    out.values[v] = mean[v] + fresh.values[v] - correction[v];
  for (std::size_t k = 0; k < target.size(); ++k) out.values[target[k]] = given[k];  // exact, not ~1e-17
  return out;
}

double cluster_functional_M(const FieldSample& field, const PotentialSolve& eq) {
  if (field.values.size() != eq.equilibrium.size())
    throw std::invalid_argument("field and equilibrium measure live on different domains");
  double m = 0;
  for (VertexId v : eq.target) m += eq.equilibrium[v] * field.values[v];
  return m;
}

void sample_bridge(double from, double to, double weight, std::span<const double> normals,
                   std::span<double> out) {
  const std::size_t pieces = out.size() + 1;
  if (normals.size() < out.size()) throw std::invalid_argument("not enough normals");
  const double length = 1.0 / (2.0 * weight);
  const double step = length / static_cast<double>(pieces);
  double value = from;
  double remaining = length;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double next_remaining = remaining - step;
    const double mean = value + (to - value) * step / remaining;
    const double var = 2.0 * step * next_remaining / remaining;
    value = mean + std::sqrt(var) * normals[k];
    out[k] = value;
    remaining = next_remaining;
  }
}

}  // namespace cablegff
