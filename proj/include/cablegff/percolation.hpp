#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cablegff/gff.hpp"
#include "cablegff/graph.hpp"
#include "cablegff/potential.hpp"

namespace cablegff {

// direct: one uniform per edge against 1 - exp(-2 w (phi_x-a)_+ (phi_y-a)_+).
// bridged: each cable carries a Brownian bridge sampled at `pieces`-1
// interior points and one uniform per piece; a piece of conductance
// pieces*w opens by the same rule, and an edge is open when all its pieces
// are. Coarser subdivisions m | pieces group consecutive pieces, so cable
// clusters for m in {1, 2, 4, 8} are nested on one realization.
enum class EdgeMode : std::uint8_t { direct, bridged };

// dirichlet_boundary: a cluster is unbounded when it reaches the box
// boundary. window: when it reaches graph distance L_obs from the origin.
enum class Censoring : std::uint8_t { dirichlet_boundary, window };

inline double open_probability(double weight, double x, double y) {
  const double px = x > 0 ? x : 0.0;
  const double py = y > 0 ? y : 0.0;
  return -std::expm1(-2.0 * weight * px * py);
}

class EdgeConfig {
 public:
  EdgeConfig(const FieldSample& field, double level, EdgeMode mode = EdgeMode::direct,
             int pieces = 8);
  // Prescribed open set (test configurations); flags indexed by edge id.
  static EdgeConfig from_flags(const FieldSample& field, double level, std::vector<char> open);

  const FieldSample& field() const noexcept { return *field_; }
  const WeightedGraph& graph() const noexcept { return *field_->domain; }
  double level() const noexcept { return level_; }
  EdgeMode mode() const noexcept { return mode_; }
  int pieces() const noexcept { return pieces_; }

  bool open(EdgeId e) const;
  // Leading open pieces counted from endpoint `from` (pieces() when the whole
  // edge is open). Direct mode and flag configurations report 0 or pieces().
  int open_pieces_from(EdgeId e, VertexId from) const;

  // Uniform attached to an edge in direct mode.
  double edge_uniform(EdgeId e) const;
  // Bridge values at the interior points, from edge(e).u to edge(e).v.
  void bridge_values(EdgeId e, std::span<double> out) const;

 private:
  EdgeConfig() = default;
  std::uint32_t piece_mask(EdgeId e) const;  // bit k: piece k open (from u)

  const FieldSample* field_ = nullptr;
  double level_ = 0.0;
  EdgeMode mode_ = EdgeMode::direct;
  int pieces_ = 8;
  std::vector<char> flags_;
};

// Edge leaving the cluster, with the open part of its cable.
struct PartialEdge {
  VertexId inside;
  VertexId outside;
  EdgeId edge;
  double weight;
  int open_pieces;  // out of EdgeConfig::pieces()
};

struct ClusterResult {
  double level = 0.0;
  std::vector<VertexId> vertices;  // discovery order, origin first
  bool censored = false;
  int radius = -1;  // -1 when empty or censored
  std::size_t volume = 0;
  std::vector<PartialEdge> partial;  // bridged mode only
  int pieces = 1;                    // resolution of `partial`
  std::optional<double> cap_discrete;
  std::map<int, double> cap_refined;  // m -> cap

  bool empty() const noexcept { return vertices.empty(); }
  bool bounded() const noexcept { return !censored; }
};

struct ExploreOptions {
  Censoring censoring = Censoring::dirichlet_boundary;
  int window = 0;   // L_obs for window censoring
  int confine = -1;  // if >= 0, vertices farther out are never entered
};

// Worker-local exploration scratch for one graph.
class ClusterExplorer {
 public:
  ClusterExplorer(const WeightedGraph& graph, ExploreOptions options);

  const WeightedGraph& graph() const noexcept { return *graph_; }
  const ExploreOptions& options() const noexcept { return options_; }
  // Graph distance from the origin.
  std::span<const int> distances() const noexcept { return distance_; }

  // Open cluster of the origin; stops as soon as it is censored.
  ClusterResult explore(const EdgeConfig& config);
  // Is some vertex of B(0, inner) with phi >= a joined by open edges to a
  // vertex at distance >= outer?
  bool crossing(const EdgeConfig& config, int inner, int outer);

 private:
  bool censors(VertexId v) const noexcept;
  bool mark(VertexId v) noexcept;

  const WeightedGraph* graph_;
  ExploreOptions options_;
  std::vector<int> distance_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
  std::vector<VertexId> stack_;
};

ClusterResult cluster_of_origin(const EdgeConfig& config, ExploreOptions options = {});

// Fills cap_discrete (m = 1) or cap_refined[m]. For m > 1 the cluster must
// come from a bridged configuration with m dividing its piece count.
void cluster_capacity(const PotentialSolver& solver, ClusterResult& cluster, int m);

// Conductances of the unexplored remainders of partial cables at resolution m.
std::vector<ConductanceOverride> cable_overrides(const ClusterResult& cluster, int m);

struct ConnectionTargets {
  std::vector<int> radii;
  std::vector<VertexId> vertices;
  std::optional<std::pair<int, int>> ball_crossing;  // (inner, outer)
};

struct ConnectionIndicators {
  bool censored = false;
  std::vector<char> radius;  // r <= rad < inf
  std::vector<char> vertex;  // x in bounded cluster
  std::optional<bool> ball_crossing;
};

// Radii beyond the explorer's reach (L_obs in window mode) are rejected.
ConnectionIndicators connection_events(ClusterExplorer& explorer, const EdgeConfig& config,
                                       const ClusterResult& cluster,
                                       const ConnectionTargets& targets);

// Clusters at several levels of one field with shared coins, explored from
// the highest level down. Once a level is censored all lower ones are too
// (the open sets are nested) and are reported censored without exploring.
std::vector<ClusterResult> scan_levels(ClusterExplorer& explorer, const FieldSample& field,
                                       std::span<const double> levels, EdgeMode mode,
                                       int pieces = 8);

}  // namespace cablegff
