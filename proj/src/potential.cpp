#include "cablegff/potential.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "cablegff/spectral.hpp"

namespace cablegff {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

struct PotentialSolver::Impl {
  const WeightedGraph* graph;
  SolverOptions options;
  std::unique_ptr<BoxSpectrum> spectrum;
  Eigen::SparseMatrix<double> laplacian;  // interior block, both triangles
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> factor;
  std::vector<double> diagonal;  // lambda_x on the interior

  std::size_t n() const { return graph->interior_count(); }

  void apply_laplacian(std::span<const double> in, std::span<double> out) const {
    if (spectrum) {
      spectrum->apply_laplacian(in, out);
      return;
    }
    Eigen::Map<const Eigen::VectorXd> x(in.data(), static_cast<Eigen::Index>(in.size()));
    Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
    y.noalias() = laplacian * x;
  }

  // Full interior inverse, or Jacobi when no factor is held.
  void precondition(std::span<double> values) const {
    if (spectrum) {
      spectrum->apply_inverse(values);
    } else if (factor) {
      Eigen::Map<Eigen::VectorXd> x(values.data(), static_cast<Eigen::Index>(values.size()));
      x = factor->solve(Eigen::VectorXd(x));
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) values[i] /= diagonal[i];
    }
  }

  bool exact_inverse() const { return spectrum || factor; }

  struct Masked {
    std::vector<char> free;                                // per interior index
    std::vector<std::pair<std::size_t, double>> diag_shift;  // override deltas
  };

  // Conjugate gradients on the system restricted to free unknowns.
  int solve_masked(const Masked& m, std::span<const double> rhs,
                   std::span<double> x, double& residual) const {
    const std::size_t size = n();
    std::fill(x.begin(), x.end(), 0.0);
    std::vector<double> r(rhs.begin(), rhs.end()), z(size), p(size), ap(size);
    const double bnorm = std::sqrt(dot(r, r));
    residual = 0;
    if (bnorm == 0) return 0;
    auto apply = [&](std::span<const double> v, std::span<double> out) {
      apply_laplacian(v, out);
      for (std::size_t i = 0; i < size; ++i)
        if (!m.free[i]) out[i] = 0;
      for (auto [i, delta] : m.diag_shift) out[i] += delta * v[i];
    };
    auto precond = [&](std::span<const double> in, std::span<double> out) {
      for (std::size_t i = 0; i < size; ++i) out[i] = m.free[i] ? in[i] : 0.0;
      precondition(out);
      for (std::size_t i = 0; i < size; ++i)
        if (!m.free[i]) out[i] = 0;
    };
    precond(r, z);
    p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= options.max_iterations; ++it) {
      apply(p, ap);
      const double alpha = rz / dot(p, ap);
      for (std::size_t i = 0; i < size; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      residual = std::sqrt(dot(r, r)) / bnorm;
      if (residual <= options.tolerance) return it;
      precond(r, z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < size; ++i) p[i] = z[i] + beta * p[i];
    }
    // Recompute the true residual before giving up: the recursive one
    // drifts once it is near machine precision.
    apply(x, ap);
    double rr = 0;
    for (std::size_t i = 0; i < size; ++i) rr += (rhs[i] - ap[i]) * (rhs[i] - ap[i]);
    residual = std::sqrt(rr) / bnorm;
    if (residual <= std::max(options.tolerance, 1e-10)) return options.max_iterations;
    throw SolverError("conjugate gradients did not converge, relative residual " +
                          std::to_string(residual),
                      residual);
  }

  // Full interior system L x = b.
  void solve_full(std::span<double> values) const {
    if (exact_inverse()) {
      precondition(values);
      return;
    }
    Masked m;
    m.free.assign(n(), 1);
    std::vector<double> rhs(values.begin(), values.end());
    double residual = 0;
    solve_masked(m, rhs, values, residual);
  }
};

PotentialSolver::PotentialSolver(const WeightedGraph& graph, SolverOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->graph = &graph;
  impl_->options = options;
  const std::size_t n = graph.interior_count();
  if (n == 0) throw GraphError("graph has no interior vertices");
  impl_->diagonal.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    impl_->diagonal[i] = graph.vertex_weight(graph.interior_vertex(i));

  if (graph.is_unit_lattice()) {
    impl_->spectrum = std::make_unique<BoxSpectrum>(*graph.lattice());
    return;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    const VertexId v = graph.interior_vertex(i);
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), impl_->diagonal[i]);
    for (const Neighbor& nb : graph.neighbors(v)) {
      const auto j = graph.interior_index(nb.vertex);
      if (j >= 0) triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), -nb.weight);
    }
  }
  impl_->laplacian.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  impl_->laplacian.setFromTriplets(triplets.begin(), triplets.end());
  if (n <= options.direct_limit) {
    impl_->factor = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>(
        impl_->laplacian);
    if (impl_->factor->info() != Eigen::Success)
      throw SolverError("Cholesky factorization failed: Laplacian is not positive definite",
                        std::nan(""));
  }
}

PotentialSolver::~PotentialSolver() = default;
PotentialSolver::PotentialSolver(PotentialSolver&&) noexcept = default;
PotentialSolver& PotentialSolver::operator=(PotentialSolver&&) noexcept = default;

const WeightedGraph& PotentialSolver::graph() const noexcept { return *impl_->graph; }
const BoxSpectrum* PotentialSolver::spectrum() const noexcept { return impl_->spectrum.get(); }
bool PotentialSolver::has_factorization() const noexcept { return impl_->exact_inverse(); }

GreenTable PotentialSolver::green_column(VertexId source) const {
  const WeightedGraph& g = *impl_->graph;
  GreenTable table;
  table.source = source;
  table.values.assign(g.vertex_count(), 0.0);
  const auto s = g.interior_index(source);
  if (s < 0) return table;  // boundary source: identically zero
  std::vector<double> x(g.interior_count(), 0.0);
  x[static_cast<std::size_t>(s)] = 1.0;
  impl_->solve_full(x);
  for (std::size_t i = 0; i < x.size(); ++i) table.values[g.interior_vertex(i)] = x[i];
  return table;
}

double PotentialSolver::green(VertexId x, VertexId y) const {
  return green_column(y).values[x];
}

std::vector<double> PotentialSolver::green_potential(std::span<const double> measure) const {
  const WeightedGraph& g = *impl_->graph;
  if (measure.size() != g.vertex_count()) throw std::invalid_argument("measure size mismatch");
  std::vector<double> x(g.interior_count());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = measure[g.interior_vertex(i)];
  impl_->solve_full(x);
  std::vector<double> out(g.vertex_count(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) out[g.interior_vertex(i)] = x[i];
  return out;
}

std::vector<double> PotentialSolver::harmonic_extension(std::span<const VertexId> target,
                                                        std::span<const double> values) const {
  const WeightedGraph& g = *impl_->graph;
  if (target.size() != values.size()) throw std::invalid_argument("values do not match target");
  const std::size_t n = g.interior_count();
  Impl::Masked mask;
  mask.free.assign(n, 1);
  std::vector<double> out(g.vertex_count(), 0.0);
  for (std::size_t k = 0; k < target.size(); ++k) {
    const auto i = g.interior_index(target[k]);
    if (i < 0) throw std::invalid_argument("target set touches the Dirichlet boundary");
    mask.free[static_cast<std::size_t>(i)] = 0;
    out[target[k]] = values[k];
  }
  std::vector<double> rhs(n, 0.0), x(n);
  for (VertexId v : target)
    for (const Neighbor& nb : g.neighbors(v)) {
      const auto j = g.interior_index(nb.vertex);
      if (j >= 0 && mask.free[static_cast<std::size_t>(j)])
        rhs[static_cast<std::size_t>(j)] += nb.weight * out[v];
    }
  double residual = 0;
  impl_->solve_masked(mask, rhs, x, residual);
  for (std::size_t i = 0; i < n; ++i)
    if (mask.free[i]) out[g.interior_vertex(i)] = x[i];
  return out;
}

PotentialSolve PotentialSolver::equilibrium(std::span<const VertexId> target,
                                            std::span<const ConductanceOverride> overrides) const {
  const WeightedGraph& g = *impl_->graph;
  if (target.empty()) throw std::invalid_argument("target set is empty");
  const std::size_t n = g.interior_count();
  PotentialSolve out;
  out.target.assign(target.begin(), target.end());
  std::sort(out.target.begin(), out.target.end());
  out.target.erase(std::unique(out.target.begin(), out.target.end()), out.target.end());

  Impl::Masked mask;
  mask.free.assign(n, 1);
  std::vector<char> in_target(g.vertex_count(), 0);
  for (VertexId v : out.target) {
    const auto i = g.interior_index(v);
    if (i < 0) throw std::invalid_argument("target set touches the Dirichlet boundary");
    mask.free[static_cast<std::size_t>(i)] = 0;
    in_target[v] = 1;
  }

  // Effective conductance of each edge leaving K, after overrides.
  std::unordered_map<std::uint64_t, double> replaced;
  auto key = [](VertexId inside, VertexId outside) {
    return (std::uint64_t{inside} << 32) | outside;
  };
  for (const auto& o : overrides) {
    if (!in_target[o.inside] || in_target[o.outside])
      throw std::invalid_argument("conductance override must cross the target boundary");
    if (!(o.conductance > 0) || !std::isfinite(o.conductance))
      throw std::invalid_argument("override conductance must be positive");
    replaced[key(o.inside, o.outside)] = o.conductance;
  }
  auto conductance = [&](VertexId inside, const Neighbor& nb) {
    if (replaced.empty()) return nb.weight;
    const auto it = replaced.find(key(inside, nb.vertex));
    return it == replaced.end() ? nb.weight : it->second;
  };

  std::vector<double> rhs(n, 0.0), x(n);
  for (VertexId v : out.target)
    for (const Neighbor& nb : g.neighbors(v)) {
      if (in_target[nb.vertex]) continue;
      const auto j = g.interior_index(nb.vertex);
      if (j < 0) continue;
      const double w = conductance(v, nb);
      if (w != nb.weight) mask.diag_shift.emplace_back(static_cast<std::size_t>(j), w - nb.weight);
      rhs[static_cast<std::size_t>(j)] += w;
    }
  out.iterations = impl_->solve_masked(mask, rhs, x, out.residual);

  out.hitting.assign(g.vertex_count(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    out.hitting[g.interior_vertex(i)] = mask.free[i] ? x[i] : 1.0;
  out.equilibrium.assign(g.vertex_count(), 0.0);
  double cap = 0;
  for (VertexId v : out.target) {
    double e = 0;
    for (const Neighbor& nb : g.neighbors(v)) {
      if (in_target[nb.vertex]) continue;
      e += conductance(v, nb) * (1.0 - out.hitting[nb.vertex]);
    }
    out.equilibrium[v] = e;
    cap += e;
  }
  out.capacity = cap;
  return out;
}

RegionGreen::RegionGreen(const PotentialSolver& solver, std::span<const VertexId> region)
    : graph_(&solver.graph()), region_(region.begin(), region.end()),
      local_(solver.graph().vertex_count(), -1) {
  std::sort(region_.begin(), region_.end());
  region_.erase(std::unique(region_.begin(), region_.end()), region_.end());
  for (std::size_t i = 0; i < region_.size(); ++i) {
    if (graph_->is_boundary(region_[i]))
      throw std::invalid_argument("region must lie in the interior");
    local_[region_[i]] = static_cast<std::int64_t>(i);
  }
  const std::size_t n = region_.size();
  matrix_.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    const GreenTable col = solver.green_column(region_[j]);
    for (std::size_t i = 0; i < n; ++i) matrix_[i * n + j] = col.values[region_[i]];
  }
  // Symmetrise away solver round-off.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (matrix_[i * n + j] + matrix_[j * n + i]);
      matrix_[i * n + j] = matrix_[j * n + i] = m;
    }
}

bool RegionGreen::covers(VertexId v) const noexcept {
  return v < local_.size() && local_[v] >= 0;
}

double RegionGreen::green(VertexId x, VertexId y) const {
  if (!covers(x) || !covers(y)) throw std::invalid_argument("vertex outside the region");
  return matrix_[static_cast<std::size_t>(local_[x]) * region_.size() +
                 static_cast<std::size_t>(local_[y])];
}

double RegionGreen::capacity(std::span<const VertexId> target,
                             std::span<const ConductanceOverride> overrides) const {
  if (target.empty()) throw std::invalid_argument("target set is empty");
  std::vector<VertexId> nodes(target.begin(), target.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const std::size_t k = nodes.size();
  std::unordered_map<VertexId, double> shift;  // D_y
  double boundary_term = 0;
  for (const auto& o : overrides) {
    if (!std::binary_search(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(k), o.inside) ||
        std::binary_search(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(k), o.outside))
      throw std::invalid_argument("conductance override must cross the target boundary");
    double w = 0;
    for (const Neighbor& nb : graph_->neighbors(o.inside))
      if (nb.vertex == o.outside) w = nb.weight;
    if (w == 0) throw std::invalid_argument("override names a missing edge");
    if (graph_->is_boundary(o.outside)) boundary_term += o.conductance - w;
    else shift[o.outside] += o.conductance - w;
  }
  for (const auto& [y, d] : shift) nodes.push_back(y);
  std::sort(nodes.begin() + static_cast<std::ptrdiff_t>(k), nodes.end());
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VertexId x = nodes[static_cast<std::size_t>(i)];
    if (!covers(x)) throw std::invalid_argument("set leaves the precomputed region");
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = green(x, nodes[static_cast<std::size_t>(j)]);
    if (static_cast<std::size_t>(i) >= k) a(i, i) += 1.0 / shift.at(x);
  }
  const Eigen::VectorXd nu = a.llt().solve(Eigen::VectorXd::Ones(n));
  return nu.sum() + boundary_term;
}

double sweeping_check(const PotentialSolver& solver, std::span<const VertexId> inner,
                      std::span<const VertexId> outer) {
  const WeightedGraph& g = solver.graph();
  std::vector<char> in_outer(g.vertex_count(), 0);
  for (VertexId v : outer) in_outer[v] = 1;
  for (VertexId v : inner)
    if (!in_outer[v]) throw std::invalid_argument("inner set is not contained in outer set");
  const PotentialSolve big = solver.equilibrium(outer);
  const PotentialSolve small = solver.equilibrium(inner);
  double deviation = 0;
  std::vector<double> delta(small.target.size(), 0.0);
  for (std::size_t k = 0; k < small.target.size(); ++k) {
    std::fill(delta.begin(), delta.end(), 0.0);
    delta[k] = 1.0;
    // P_z(X_{H_K} = x) as a function of z.
    const std::vector<double> hit = solver.harmonic_extension(small.target, delta);
    double mass = 0;
    for (VertexId z : big.target) mass += big.equilibrium[z] * hit[z];
    deviation = std::max(deviation, std::abs(mass - small.equilibrium[small.target[k]]));
  }
  return deviation;
}

double potential_identity_check(const PotentialSolver& solver,
                                std::span<const VertexId> target) {
  const WeightedGraph& g = solver.graph();
  const PotentialSolve eq = solver.equilibrium(target);
  const std::vector<double> pot = solver.green_potential(eq.equilibrium);
  double worst = 0;
  for (VertexId v : g.interior_vertices())
    worst = std::max(worst, std::abs(pot[v] - eq.hitting[v]));
  return worst;
}

std::vector<std::pair<int, double>> ball_capacity_profile(const PotentialSolver& solver,
                                                          VertexId center,
                                                          std::span<const int> radii) {
  const WeightedGraph& g = solver.graph();
  std::vector<std::pair<int, double>> out;
  for (int r : radii) {
    if (const LatticeGeometry* box = g.lattice(); box && r > box->observation_radius)
      throw std::invalid_argument("ball radius " + std::to_string(r) +
                                  " exceeds the observation window");
    const std::vector<VertexId> b = ball(g, center, r);
    for (VertexId v : b)
      if (g.is_boundary(v))
        throw std::invalid_argument("ball reaches the Dirichlet boundary");
    out.emplace_back(r, solver.capacity(b));
  }
  return out;
}

GreenExtrapolation extrapolate_origin_green(int dimension, std::vector<int> half_sides) {
  if (half_sides.size() < 2) throw std::invalid_argument("need at least two box sizes");
  std::sort(half_sides.begin(), half_sides.end());
  GreenExtrapolation out;
  out.half_sides = half_sides;
  for (int L : half_sides) {
    LatticeSpec spec;
    spec.dimension = dimension;
    spec.half_side = L;
    spec.observation_radius = 0;
    const WeightedGraph g = build_lattice(spec);
    const PotentialSolver solver(g);
    out.values.push_back(solver.green(g.origin(), g.origin()));
  }
  // Polynomial in h = 1/L through all points (Neville), evaluated at h = 0.
  auto neville = [](std::span<const int> ls, std::span<const double> vs) {
    std::vector<double> p(vs.begin(), vs.end());
    const std::size_t k = p.size();
    for (std::size_t level = 1; level < k; ++level)
      for (std::size_t i = 0; i + level < k; ++i) {
        const double hi = 1.0 / ls[i], hj = 1.0 / ls[i + level];
        p[i] = (hj * p[i] - hi * p[i + 1]) / (hj - hi);
      }
    return p[0];
  };
  out.limit = neville(out.half_sides, out.values);
  const std::span<const int> ls(out.half_sides);
  const std::span<const double> vs(out.values);
  out.uncertainty = std::abs(out.limit - neville(ls.subspan(1), vs.subspan(1)));
  return out;
}

}  // namespace cablegff
