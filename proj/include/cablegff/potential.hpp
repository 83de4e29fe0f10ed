#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cablegff/graph.hpp"

namespace cablegff {

class BoxSpectrum;

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Replaces the conductance of the edge {inside, outside} (inside in K,
// outside not in K) for one solve. Used for cable clusters ending part way
// along an edge: the remaining stretch has a larger conductance.
struct ConductanceOverride {
  VertexId inside;
  VertexId outside;
  double conductance;
};

// Values are indexed by vertex id; Dirichlet vertices hold 0.
struct GreenTable {
  VertexId source = 0;
  std::vector<double> values;
};

struct PotentialSolve {
  std::vector<VertexId> target;
  std::vector<double> hitting;      // h_K
  std::vector<double> equilibrium;  // e_K, zero off K
  double capacity = 0.0;
  double residual = 0.0;  // relative residual of the harmonic solve
  int iterations = 0;
};

struct SolverOptions {
  // Largest interior for which the sparse backend factorizes the Laplacian.
  std::size_t direct_limit = 100000;
  double tolerance = 1e-12;
  int max_iterations = 20000;
};

// Dirichlet problems on one graph. Unit-weight boxes use the sine-transform
// inverse of the box Laplacian; other graphs a sparse Cholesky factor (or
// Jacobi beyond direct_limit). Masked problems (a target set K removed) are
// solved by conjugate gradients preconditioned with that full inverse, which
// differs from the masked inverse by a low-rank term.
//
// All const member functions are safe to call concurrently.
class PotentialSolver {
 public:
  explicit PotentialSolver(const WeightedGraph& graph, SolverOptions options = {});
  ~PotentialSolver();
  PotentialSolver(PotentialSolver&&) noexcept;
  PotentialSolver& operator=(PotentialSolver&&) noexcept;

  const WeightedGraph& graph() const noexcept;
  const BoxSpectrum* spectrum() const noexcept;  // null off unit boxes
  bool has_factorization() const noexcept;

  GreenTable green_column(VertexId source) const;
  double green(VertexId x, VertexId y) const;
  // x -> sum_y g_U(x, y) measure(y); measure indexed by vertex id.
  std::vector<double> green_potential(std::span<const double> measure) const;

  // Harmonic off K and the boundary, equal to values on K (same order as
  // target), zero on the boundary.
  std::vector<double> harmonic_extension(std::span<const VertexId> target,
                                         std::span<const double> values) const;

  PotentialSolve equilibrium(std::span<const VertexId> target,
                             std::span<const ConductanceOverride> overrides = {}) const;
  double capacity(std::span<const VertexId> target,
                  std::span<const ConductanceOverride> overrides = {}) const {
    return equilibrium(target, overrides).capacity;
  }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Dense Green matrix on a fixed region. Capacities of sets K, with the
// outside ends O of any overridden edges, inside the region then reduce to
// the |K|+|O| system (G_S + diag(0 on K, 1/D_y on O)) nu = 1, cap = sum nu,
// where D_y is the total conductance increase on edges into y.
class RegionGreen {
 public:
  RegionGreen(const PotentialSolver& solver, std::span<const VertexId> region);

  bool covers(VertexId v) const noexcept;
  std::size_t size() const noexcept { return region_.size(); }
  double green(VertexId x, VertexId y) const;
  double capacity(std::span<const VertexId> target,
                  std::span<const ConductanceOverride> overrides = {}) const;

 private:
  const WeightedGraph* graph_;
  std::vector<VertexId> region_;
  std::vector<std::int64_t> local_;  // vertex -> row, -1 outside
  std::vector<double> matrix_;       // row-major
};

// max_x |P_{e_{K'}}(X_{H_K} = x) - e_K(x)| for K within K'.
double sweeping_check(const PotentialSolver& solver,
                      std::span<const VertexId> inner,
                      std::span<const VertexId> outer);

// max over interior x of |sum_y g(x,y) e_K(y) - h_K(x)|.
double potential_identity_check(const PotentialSolver& solver,
                                std::span<const VertexId> target);

// (r, cap(B(center, r))) for each radius; radii beyond the observation
// window of a box are rejected.
std::vector<std::pair<int, double>> ball_capacity_profile(
    const PotentialSolver& solver, VertexId center, std::span<const int> radii);

struct GreenExtrapolation {
  std::vector<int> half_sides;
  std::vector<double> values;  // g_U(0,0) on [-L,L]^d
  double limit = 0.0;          // Richardson limit in 1/L
  double uncertainty = 0.0;    // gap to the extrapolation that drops the smallest box
};

// g_U(0,0) on unit boxes of the given half sides, extrapolated to L = inf
// with the model g + c1/L + c2/L^2 + ... (one term per extra box).
GreenExtrapolation extrapolate_origin_green(int dimension, std::vector<int> half_sides);

}  // namespace cablegff
