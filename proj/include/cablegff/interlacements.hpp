#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cablegff/gff.hpp"
#include "cablegff/graph.hpp"
#include "cablegff/potential.hpp"
#include "cablegff/stats.hpp"

namespace cablegff {

// Interlacement trajectories that meet a window K, cut at their first entrance:
// Poisson(u cap(K)) forward jump chains started from e_K / cap(K) and
// absorbed at the Dirichlet boundary (the stand-in for escaping to infinity).
// Each trajectory carries a label uniform on (0, u]; keeping labels <= u'
// gives the soup at level u' (superposition coupling).
struct TrajectorySoup {
  double u = 0.0;
  double window_capacity = 0.0;
  std::vector<VertexId> window;  // sorted
  std::vector<std::vector<VertexId>> trajectories;
  std::vector<double> labels;

  double mean_count() const noexcept { return u * window_capacity; }
  std::size_t count() const noexcept { return trajectories.size(); }
  TrajectorySoup restricted(double level) const;
};

// full: walk every trajectory to the boundary. window_trace: once a walk
// leaves K at y it returns with probability h_K(y); a returning excursion is
// the h-transformed walk, so paths stop at their last exit from K. The trace
// on K has the same law; paths outside K are shorter.
enum class SoupPaths { full, window_trace };

class SoupSampler {
 public:
  SoupSampler(const PotentialSolver& solver, std::span<const VertexId> window,
              SoupPaths mode = SoupPaths::full);

  const PotentialSolve& equilibrium() const noexcept { return equilibrium_; }
  double capacity() const noexcept { return equilibrium_.capacity; }

  // Stream (seed, stream_id(sample_index, soup)).
  TrajectorySoup sample(double u, std::uint64_t seed, std::uint64_t sample_index) const;

 private:
  const WeightedGraph* graph_;
  SoupPaths mode_;
  PotentialSolve equilibrium_;
  std::vector<char> in_window_;
  std::vector<double> entrance_cdf_;  // over equilibrium_.target
};

TrajectorySoup sample_soup(const PotentialSolver& solver, std::span<const VertexId> window,
                           double u, std::uint64_t seed, std::uint64_t sample_index);

// True when no trajectory visits `set`.
bool avoids(const TrajectorySoup& soup, std::span<const VertexId> set);

// Every pair of visited vertices in B(z, R) is joined by traversed edges with
// both ends in B(z, floor(lambda R)). Only trajectories with label <= level
// count. The ball B(z, lambda R) must lie in the soup's window.
bool loc_uniq(const TrajectorySoup& soup, const WeightedGraph& graph, VertexId z, int radius,
              double lambda_factor,
              double level = std::numeric_limits<double>::infinity());

struct CouplingComparison {
  double a = 0.0;
  int r = 0;
  double u = 0.0;           // a^2 / 2
  Proportion gff_crossing;  // B_r <-> dB_{4r} at level -a
  Proportion soup_crossing; // some trajectory through B_r reaches dB_{4r}
  double soup_exact = 0.0;  // 1 - exp(-u cap(B_r))
  double cap_ball = 0.0;
};

// Both sides of the level -a / interlacement u = a^2/2 comparison on
// `samples` independent fields and soups.
CouplingComparison coupling_consequence(const GffSampler& sampler, const PotentialSolver& solver,
                                        double a, int r, std::size_t samples,
                                        std::uint64_t seed);

}  // namespace cablegff
