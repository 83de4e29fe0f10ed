#include "cablegff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <ostream>
#include <sstream>

#include "cablegff/rng.hpp"

namespace cablegff {

std::vector<int> LatticeGeometry::coordinates(VertexId v) const {
  std::vector<int> coords(static_cast<std::size_t>(dimension));
  const int n = side();
  for (int i = dimension - 1; i >= 0; --i) {
    coords[static_cast<std::size_t>(i)] = static_cast<int>(v % n) - half_side;
    v /= static_cast<VertexId>(n);
  }
  return coords;
}

VertexId LatticeGeometry::vertex_at(std::span<const int> coords) const {
  const int n = side();
  VertexId id = 0;
  for (int c : coords) id = id * static_cast<VertexId>(n) + (c + half_side);
  return id;
}

bool LatticeGeometry::contains(std::span<const int> coords) const noexcept {
  return std::all_of(coords.begin(), coords.end(), [this](int c) {
    return c >= -half_side && c <= half_side;
  });
}

int LatticeGeometry::sup_norm(VertexId v) const {
  int best = 0;
  for (int c : coordinates(v)) best = std::max(best, std::abs(c));
  return best;
}

WeightedGraph::WeightedGraph(std::size_t vertex_count, std::vector<Edge> edges,
                             std::vector<VertexKind> kinds,
                             GraphMetadata metadata)
    : edges_(std::move(edges)),
      kinds_(std::move(kinds)),
      metadata_(std::move(metadata)) {
  if (kinds_.size() != vertex_count)
    throw GraphError("vertex kind list does not match vertex count");

  std::vector<std::size_t> degree(vertex_count, 0);
  for (const Edge& e : edges_) {
    if (e.u >= vertex_count || e.v >= vertex_count)
      throw GraphError("edge endpoint out of range");
    ++degree[e.u];
    ++degree[e.v];
  }
  offsets_.assign(vertex_count + 1, 0);
  for (std::size_t v = 0; v < vertex_count; ++v)
    offsets_[v + 1] = offsets_[v] + degree[v];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  vertex_weight_.assign(vertex_count, 0.0);
  for (EdgeId id = 0; id < edges_.size(); ++id) {
    const Edge& e = edges_[id];
    adjacency_[fill[e.u]++] = {e.v, id, e.weight};
    adjacency_[fill[e.v]++] = {e.u, id, e.weight};
    vertex_weight_[e.u] += e.weight;
    vertex_weight_[e.v] += e.weight;
  }

  interior_index_.assign(vertex_count, -1);
  for (VertexId v = 0; v < vertex_count; ++v) {
    if (kinds_[v] == VertexKind::interior) {
      interior_index_[v] = static_cast<std::int64_t>(interior_.size());
      interior_.push_back(v);
    }
  }
}

void WeightedGraph::check_invariants() const {
  for (const Edge& e : edges_) {
    if (e.u == e.v) throw GraphError("self loop present");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      throw GraphError("edge weight must be positive and finite");
  }
  // Symmetry: every stored half-edge has a mirror with the same weight.
  for (VertexId v = 0; v < vertex_count(); ++v) {
    double sum = 0.0;
    for (const Neighbor& nb : neighbors(v)) {
      sum += nb.weight;
      const auto back = neighbors(nb.vertex);
      const bool mirrored = std::any_of(back.begin(), back.end(), [&](const Neighbor& b) {
        return b.vertex == v && b.edge == nb.edge && b.weight == nb.weight;
      });
      if (!mirrored) throw GraphError("edge weights are not symmetric");
    }
    if (std::abs(sum - vertex_weight_[v]) > 1e-12 * std::max(1.0, sum))
      throw GraphError("vertex weight differs from sum of edge weights");
  }
  if (interior_.empty()) throw GraphError("graph has no interior vertices");
  std::vector<char> seen(vertex_count(), 0);
  std::deque<VertexId> queue{interior_.front()};
  seen[interior_.front()] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const VertexId v = queue.front();
    queue.pop_front();
    for (const Neighbor& nb : neighbors(v)) {
      if (is_boundary(nb.vertex) || seen[nb.vertex]) continue;
      seen[nb.vertex] = 1;
      ++reached;
      queue.push_back(nb.vertex);
    }
  }
  if (reached != interior_.size())
    throw GraphError("interior subgraph is not connected");
}

WeightedGraph build_lattice(const LatticeSpec& spec) {
  if (spec.dimension < 3)
    throw GraphError("non-transient dimension: lattice needs d >= 3");
  if (spec.half_side < 1) throw GraphError("half side L must be >= 1");
  if (spec.observation_radius < 0 ||
      spec.observation_radius >= spec.half_side)
    throw GraphError("observation radius must satisfy 0 <= L_obs <= L-1");
  if (spec.weight_mode == WeightMode::uniformly_elliptic_random &&
      !(spec.weight_low > 0.0 && spec.weight_low <= spec.weight_high))
    throw GraphError("random weights need 0 < c_lo <= c_hi");

  LatticeGeometry geo{spec.dimension, spec.half_side, spec.observation_radius};
  const int n = geo.side();
  std::size_t count = 1;
  for (int i = 0; i < spec.dimension; ++i) count *= static_cast<std::size_t>(n);

  std::vector<VertexKind> kinds(count, VertexKind::interior);
  std::vector<Edge> edges;
  edges.reserve(count * static_cast<std::size_t>(spec.dimension));
  std::vector<std::size_t> stride(static_cast<std::size_t>(spec.dimension));
  stride.back() = 1;
  for (int i = spec.dimension - 2; i >= 0; --i)
    stride[static_cast<std::size_t>(i)] =
        stride[static_cast<std::size_t>(i) + 1] * static_cast<std::size_t>(n);

  std::vector<int> idx(static_cast<std::size_t>(spec.dimension), 0);
  for (std::size_t v = 0; v < count; ++v) {
    std::size_t rest = v;
    bool on_face = false;
    for (int i = spec.dimension - 1; i >= 0; --i) {
      idx[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(n));
      rest /= static_cast<std::size_t>(n);
      on_face = on_face || idx[static_cast<std::size_t>(i)] == 0 ||
                idx[static_cast<std::size_t>(i)] == n - 1;
    }
    if (on_face) kinds[v] = VertexKind::dirichlet;
    for (int i = 0; i < spec.dimension; ++i) {
      if (idx[static_cast<std::size_t>(i)] + 1 < n)
        edges.push_back({static_cast<VertexId>(v),
                         static_cast<VertexId>(v + stride[static_cast<std::size_t>(i)]), 1.0});
    }
  }
  if (spec.weight_mode == WeightMode::uniformly_elliptic_random) {
    const std::uint64_t stream = stream_id(0, StreamPurpose::weights);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double u = to_unit_open(keyed_bits(spec.weight_seed, stream, e)[0]);
      edges[e].weight = spec.weight_low + (spec.weight_high - spec.weight_low) * u;
    }
  }

  GraphMetadata meta;
  meta.nu = spec.dimension - 2;
  meta.alpha = spec.dimension;
  meta.origin = static_cast<VertexId>((count - 1) / 2);
  meta.lattice = geo;
  meta.weight_mode = spec.weight_mode;
  meta.weight_seed = spec.weight_seed;
  return WeightedGraph(count, std::move(edges), std::move(kinds), std::move(meta));
}

RefinedGraph refine(const WeightedGraph& graph, int subdivision) {
  if (subdivision < 1) throw GraphError("subdivision m must be >= 1");
  const auto m = static_cast<std::size_t>(subdivision);
  const std::size_t base_n = graph.vertex_count();
  std::vector<VertexKind> kinds(graph.vertex_count());
  for (VertexId v = 0; v < base_n; ++v) kinds[v] = graph.kind(v);

  RefinedGraph out;
  out.subdivision = subdivision;
  out.base_vertex_count = base_n;
  out.chain.resize(graph.edge_count());
  std::vector<Edge> edges;
  edges.reserve(graph.edge_count() * m);
  VertexId next = static_cast<VertexId>(base_n);
  for (EdgeId e = 0; e < graph.edge_count(); ++e) {
    const Edge& base = graph.edge(e);
    const double w = base.weight * static_cast<double>(m);
    const VertexKind chain_kind =
        (graph.is_boundary(base.u) && graph.is_boundary(base.v))
            ? VertexKind::dirichlet
            : VertexKind::interior;
    VertexId prev = base.u;
    for (std::size_t k = 1; k < m; ++k) {
      out.chain[e].push_back(next);
      kinds.push_back(chain_kind);
      edges.push_back({prev, next, w});
      prev = next++;
    }
    edges.push_back({prev, base.v, w});
  }
  GraphMetadata meta = graph.metadata();
  meta.lattice.reset();
  const std::size_t count = kinds.size();
  out.graph = WeightedGraph(count, std::move(edges), std::move(kinds), meta);
  return out;
}

namespace {

std::vector<int> bfs_distances(const WeightedGraph& graph, VertexId source) {
  std::vector<int> dist(graph.vertex_count(), -1);
  std::deque<VertexId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const VertexId v = queue.front();
    queue.pop_front();
    for (const Neighbor& nb : graph.neighbors(v)) {
      if (dist[nb.vertex] >= 0) continue;
      dist[nb.vertex] = dist[v] + 1;
      queue.push_back(nb.vertex);
    }
  }
  return dist;
}

}  // namespace

std::vector<int> distances_from(const WeightedGraph& graph, VertexId source) {
  const LatticeGeometry* geo = graph.lattice();
  if (!geo) return bfs_distances(graph, source);
  const auto c0 = geo->coordinates(source);
  std::vector<int> dist(graph.vertex_count());
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    const auto c = geo->coordinates(v);
    int d = 0;
    for (std::size_t i = 0; i < c.size(); ++i) d += std::abs(c[i] - c0[i]);
    dist[v] = d;
  }
  return dist;
}

int graph_distance(const WeightedGraph& graph, VertexId x, VertexId y) {
  if (const LatticeGeometry* geo = graph.lattice()) {
    const auto a = geo->coordinates(x);
    const auto b = geo->coordinates(y);
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
  }
  return bfs_distances(graph, x)[y];
}

std::vector<VertexId> ball(const WeightedGraph& graph, VertexId center,
                           int radius) {
  if (graph.is_boundary(center))
    throw GraphError("ball center must be an interior vertex");
  if (radius < 0) throw GraphError("ball radius must be nonnegative");
  std::vector<VertexId> out;
  if (const LatticeGeometry* geo = graph.lattice()) {
    const auto c0 = geo->coordinates(center);
    const int d = geo->dimension;
    std::vector<int> offset(static_cast<std::size_t>(d), -radius);
    std::vector<int> point(static_cast<std::size_t>(d));
    // Enumerate the cube [-r, r]^d and keep l1 <= r, clipped to the box.
    while (true) {
      int l1 = 0;
      for (int i = 0; i < d; ++i) {
        l1 += std::abs(offset[static_cast<std::size_t>(i)]);
        point[static_cast<std::size_t>(i)] = c0[static_cast<std::size_t>(i)] + offset[static_cast<std::size_t>(i)];
      }
      if (l1 <= radius && geo->contains(point)) out.push_back(geo->vertex_at(point));
      int i = d - 1;
      while (i >= 0 && offset[static_cast<std::size_t>(i)] == radius) {
        offset[static_cast<std::size_t>(i)] = -radius;
        --i;
      }
      if (i < 0) break;
      ++offset[static_cast<std::size_t>(i)];
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  const auto dist = bfs_distances(graph, center);
  for (VertexId v = 0; v < graph.vertex_count(); ++v)
    if (dist[v] >= 0 && dist[v] <= radius) out.push_back(v);
  return out;
}

void write_graph_csv(std::ostream& out, const WeightedGraph& graph) {
  const auto& meta = graph.metadata();
  const LatticeGeometry* geo = graph.lattice();
  out << "#d,L,L_obs,weight_mode,seed\n";
  out << '#' << (geo ? geo->dimension : 0) << ',' << (geo ? geo->half_side : 0)
      << ',' << (geo ? geo->observation_radius : 0) << ','
      << (meta.weight_mode == WeightMode::unit ? "unit" : "uniformly_elliptic_random")
      << ',' << meta.weight_seed << '\n';
  out << "vertex_u,vertex_v,weight\n";
  std::ostringstream line;
  line.precision(17);
  for (const Edge& e : graph.edges()) {
    line.str({});
    line << e.u << ',' << e.v << ',' << e.weight << '\n';
    out << line.str();
  }
}

}  // namespace cablegff
