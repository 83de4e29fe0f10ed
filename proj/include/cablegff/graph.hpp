#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cablegff {

using VertexId = std::uint32_t;
using EdgeId = std::uint32_t;

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class VertexKind : std::uint8_t { interior, dirichlet };

enum class DistanceKind : std::uint8_t { graph };

enum class WeightMode : std::uint8_t { unit, uniformly_elliptic_random };

struct Edge {
  VertexId u;
  VertexId v;
  double weight;
};

struct Neighbor {
  VertexId vertex;
  EdgeId edge;
  double weight;
};

struct LatticeSpec {
  int dimension = 3;
  int half_side = 16;
  int observation_radius = 10;
  WeightMode weight_mode = WeightMode::unit;
  double weight_low = 1.0;
  double weight_high = 1.0;
  std::uint64_t weight_seed = 0;
};

// Box [-L, L]^d stored in row-major order, last coordinate fastest.
struct LatticeGeometry {
  int dimension = 3;
  int half_side = 0;
  int observation_radius = 0;

  int side() const noexcept { return 2 * half_side + 1; }
  std::vector<int> coordinates(VertexId v) const;
  VertexId vertex_at(std::span<const int> coords) const;
  bool contains(std::span<const int> coords) const noexcept;
  int sup_norm(VertexId v) const;
};

struct GraphMetadata {
  DistanceKind distance = DistanceKind::graph;
  double nu = 1.0;     // Green decay exponent
  double alpha = 3.0;  // volume growth exponent
  VertexId origin = 0;
  std::optional<LatticeGeometry> lattice;
  WeightMode weight_mode = WeightMode::unit;
  std::uint64_t weight_seed = 0;
};

class WeightedGraph {
 public:
  WeightedGraph() = default;
  WeightedGraph(std::size_t vertex_count, std::vector<Edge> edges,
                std::vector<VertexKind> kinds, GraphMetadata metadata = {});

  std::size_t vertex_count() const noexcept { return kinds_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t interior_count() const noexcept { return interior_.size(); }

  std::span<const Neighbor> neighbors(VertexId v) const noexcept {
    return {adjacency_.data() + offsets_[v],
            adjacency_.data() + offsets_[v + 1]};
  }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(EdgeId e) const noexcept { return edges_[e]; }

  double vertex_weight(VertexId v) const noexcept { return vertex_weight_[v]; }
  VertexKind kind(VertexId v) const noexcept { return kinds_[v]; }
  bool is_boundary(VertexId v) const noexcept {
    return kinds_[v] == VertexKind::dirichlet;
  }

  // Dense numbering of interior vertices; -1 for boundary vertices.
  std::int64_t interior_index(VertexId v) const noexcept {
    return interior_index_[v];
  }
  VertexId interior_vertex(std::size_t i) const noexcept { return interior_[i]; }
  std::span<const VertexId> interior_vertices() const noexcept {
    return interior_;
  }

  VertexId origin() const noexcept { return metadata_.origin; }
  const GraphMetadata& metadata() const noexcept { return metadata_; }
  const LatticeGeometry* lattice() const noexcept {
    return metadata_.lattice ? &*metadata_.lattice : nullptr;
  }

  // True for boxes of unit weights, where spectral solvers apply.
  bool is_unit_lattice() const noexcept {
    return metadata_.lattice.has_value() &&
           metadata_.weight_mode == WeightMode::unit;
  }

  // Throws GraphError on asymmetric or non-positive weights, inconsistent
  // vertex weights, self loops, or a disconnected interior.
  void check_invariants() const;

 private:
  std::vector<Edge> edges_;
  std::vector<VertexKind> kinds_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
  std::vector<double> vertex_weight_;
  std::vector<std::int64_t> interior_index_;
  std::vector<VertexId> interior_;
  GraphMetadata metadata_;
};

WeightedGraph build_lattice(const LatticeSpec& spec);

// Each edge of weight w becomes a chain of m edges of weight m*w. Original
// vertices keep their ids; chain vertices follow in edge order.
struct RefinedGraph {
  WeightedGraph graph;
  int subdivision = 1;
  std::size_t base_vertex_count = 0;
  // chain[e] lists the m-1 interior chain vertices of base edge e, ordered
  // from edge(e).u towards edge(e).v.
  std::vector<std::vector<VertexId>> chain;

  VertexId refined_id(VertexId base_vertex) const noexcept {
    return base_vertex;
  }
};

RefinedGraph refine(const WeightedGraph& graph, int subdivision);

std::vector<VertexId> ball(const WeightedGraph& graph, VertexId center,
                           int radius);
int graph_distance(const WeightedGraph& graph, VertexId x, VertexId y);

// Distances from `source` to every vertex (BFS, or the l1 norm on boxes).
std::vector<int> distances_from(const WeightedGraph& graph, VertexId source);

void write_graph_csv(std::ostream& out, const WeightedGraph& graph);

}  // namespace cablegff
