#include "cablegff/percolation.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cablegff/rng.hpp"

namespace cablegff {

namespace {

constexpr int kMaxPieces = 32;

std::uint64_t edge_stream(const FieldSample& f) {
  return stream_id(f.sample_index, StreamPurpose::edges);
}

}  // namespace

EdgeConfig::EdgeConfig(const FieldSample& field, double level, EdgeMode mode, int pieces)
    : field_(&field), level_(level), mode_(mode), pieces_(mode == EdgeMode::direct ? 1 : pieces) {
  if (!field.domain) throw std::invalid_argument("field has no domain");
  if (pieces_ < 1 || pieces_ > kMaxPieces)
    throw std::invalid_argument("pieces per cable must lie in 1..32");
}

EdgeConfig EdgeConfig::from_flags(const FieldSample& field, double level,
                                  std::vector<char> open) {
  if (!field.domain || open.size() != field.domain->edge_count())
    throw std::invalid_argument("one flag per edge required");
  const WeightedGraph& g = *field.domain;
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edge(e);
    if (open[e] && (field[edge.u] < level || field[edge.v] < level))
      throw std::invalid_argument("an open edge needs both endpoint values >= level");
  }
  EdgeConfig c;
  c.field_ = &field;
  c.level_ = level;
  c.mode_ = EdgeMode::direct;
  c.pieces_ = 1;
  c.flags_ = std::move(open);
  return c;
}

double EdgeConfig::edge_uniform(EdgeId e) const {
  return to_unit_open(keyed_bits(field_->seed, edge_stream(*field_), e)[0]);
}

// Keyed layout per edge: `pieces` + 1 blocks, normals first (Box-Muller on
// the two words of a block), then uniforms two per block.
void EdgeConfig::bridge_values(EdgeId e, std::span<double> out) const {
  const Edge& edge = graph().edge(e);
  const int n = pieces_ - 1;
  std::array<double, kMaxPieces> normals{};
  const std::uint64_t base = std::uint64_t{e} * static_cast<std::uint64_t>(pieces_ + 1);
  for (int k = 0; k < n; k += 2) {
    const auto bits = keyed_bits(field_->seed, edge_stream(*field_), base + static_cast<std::uint64_t>(k / 2));
    const double radius = std::sqrt(-2.0 * std::log(to_unit_open(bits[0])));
    const double angle = 2.0 * std::numbers::pi * to_unit_open(bits[1]);
    normals[static_cast<std::size_t>(k)] = radius * std::cos(angle);
    normals[static_cast<std::size_t>(k) + 1] = radius * std::sin(angle);
  }
  sample_bridge((*field_)[edge.u], (*field_)[edge.v], edge.weight,
                std::span<const double>(normals.data(), static_cast<std::size_t>(n)),
                out.subspan(0, static_cast<std::size_t>(n)));
}

std::uint32_t EdgeConfig::piece_mask(EdgeId e) const {
  const Edge& edge = graph().edge(e);
  std::array<double, kMaxPieces + 1> b{};
  b[0] = (*field_)[edge.u];
  b[static_cast<std::size_t>(pieces_)] = (*field_)[edge.v];
  bridge_values(e, std::span<double>(b.data() + 1, static_cast<std::size_t>(pieces_ - 1)));
  const std::uint64_t base = std::uint64_t{e} * static_cast<std::uint64_t>(pieces_ + 1) +
                             static_cast<std::uint64_t>(pieces_ / 2);
  const double w = edge.weight * pieces_;
  std::uint32_t mask = 0;
  std::array<std::uint64_t, 2> bits{};
  for (int k = 0; k < pieces_; ++k) {
    if (k % 2 == 0) bits = keyed_bits(field_->seed, edge_stream(*field_), base + static_cast<std::uint64_t>(k / 2));
    const double u = to_unit_open(bits[static_cast<std::size_t>(k % 2)]);
    const auto ks = static_cast<std::size_t>(k);
    if (u <= open_probability(w, b[ks] - level_, b[ks + 1] - level_)) mask |= 1u << k;
  }
  return mask;
}

bool EdgeConfig::open(EdgeId e) const {
  if (!flags_.empty()) return flags_[e] != 0;
  const Edge& edge = graph().edge(e);
  const double x = (*field_)[edge.u] - level_;
  const double y = (*field_)[edge.v] - level_;
  if (x <= 0 || y <= 0) return false;
  if (mode_ == EdgeMode::direct) return edge_uniform(e) <= open_probability(edge.weight, x, y);
  const std::uint32_t full = pieces_ == 32 ? ~0u : (1u << pieces_) - 1;
  return piece_mask(e) == full;
}

int EdgeConfig::open_pieces_from(EdgeId e, VertexId from) const {
  if (mode_ == EdgeMode::direct || !flags_.empty()) return open(e) ? pieces_ : 0;
  const Edge& edge = graph().edge(e);
  if ((*field_)[from] <= level_) return 0;
  std::uint32_t mask = piece_mask(e);
  if (from == edge.v) {
    std::uint32_t reversed = 0;
    for (int k = 0; k < pieces_; ++k)
      if (mask & (1u << k)) reversed |= 1u << (pieces_ - 1 - k);
    mask = reversed;
  } else if (from != edge.u) {
    throw std::invalid_argument("vertex is not an endpoint of the edge");
  }
  int count = 0;
  while (count < pieces_ && (mask & (1u << count))) ++count;
  return count;
}

ClusterExplorer::ClusterExplorer(const WeightedGraph& graph, ExploreOptions options)
    : graph_(&graph), options_(options), distance_(distances_from(graph, graph.origin())),
      stamp_(graph.vertex_count(), 0) {
  if (options_.censoring == Censoring::window && options_.window < 1)
    throw std::invalid_argument("window censoring needs L_obs >= 1");
}

bool ClusterExplorer::censors(VertexId v) const noexcept {
  if (graph_->is_boundary(v)) return true;
  return options_.censoring == Censoring::window && distance_[v] >= options_.window;
}

bool ClusterExplorer::mark(VertexId v) noexcept {
  if (stamp_[v] == generation_) return false;
  stamp_[v] = generation_;
  return true;
}

ClusterResult ClusterExplorer::explore(const EdgeConfig& config) {
  if (&config.graph() != graph_) throw std::invalid_argument("configuration on another graph");
  ClusterResult result;
  result.level = config.level();
  result.pieces = config.pieces();
  const FieldSample& phi = config.field();
  const double a = config.level();
  const VertexId origin = graph_->origin();
  if (phi[origin] < a) return result;
  if (++generation_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    generation_ = 1;
  }
  const bool bridged = config.mode() == EdgeMode::bridged;
  mark(origin);
  stack_.assign(1, origin);
  result.vertices.push_back(origin);
  int radius = 0;
  while (!stack_.empty()) {
    const VertexId x = stack_.back();
    stack_.pop_back();
    for (const Neighbor& nb : graph_->neighbors(x)) {
      const VertexId y = nb.vertex;
      if (stamp_[y] == generation_) continue;
      if (options_.confine >= 0 && distance_[y] > options_.confine) continue;
      bool joined;
      if (bridged) {
        const int j = config.open_pieces_from(nb.edge, x);
        joined = j == config.pieces();
        if (!joined && j > 0) result.partial.push_back({x, y, nb.edge, nb.weight, j});
      } else {
        joined = phi[y] >= a && config.open(nb.edge);
      }
      if (!joined) continue;
      if (censors(y)) {
        result.censored = true;
        result.partial.clear();
        result.volume = result.vertices.size();
        return result;
      }
      mark(y);
      stack_.push_back(y);
      result.vertices.push_back(y);
      radius = std::max(radius, distance_[y]);
    }
  }
  result.radius = radius;
  result.volume = result.vertices.size();
  // A cable leaving towards a vertex that joined later lies inside the cluster.
  std::erase_if(result.partial,
                [&](const PartialEdge& p) { return stamp_[p.outside] == generation_; });
  return result;
}

bool ClusterExplorer::crossing(const EdgeConfig& config, int inner, int outer) {
  if (inner < 0 || outer <= inner) throw std::invalid_argument("need 0 <= inner < outer");
  const FieldSample& phi = config.field();
  const double a = config.level();
  if (++generation_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    generation_ = 1;
  }
  stack_.clear();
  for (VertexId v : ball(*graph_, graph_->origin(), inner))
    if (phi[v] >= a) {
      mark(v);
      stack_.push_back(v);
    }
  while (!stack_.empty()) {
    const VertexId x = stack_.back();
    stack_.pop_back();
    for (const Neighbor& nb : graph_->neighbors(x)) {
      const VertexId y = nb.vertex;
      if (stamp_[y] == generation_ || phi[y] < a || !config.open(nb.edge)) continue;
      if (distance_[y] >= outer) return true;
      mark(y);
      stack_.push_back(y);
    }
  }
  return false;
}

ClusterResult cluster_of_origin(const EdgeConfig& config, ExploreOptions options) {
  ClusterExplorer explorer(config.graph(), options);
  return explorer.explore(config);
}

std::vector<ConductanceOverride> cable_overrides(const ClusterResult& cluster, int m) {
  if (m < 1 || cluster.pieces % m != 0)
    throw std::invalid_argument("subdivision must divide the sampled pieces per cable");
  std::vector<ConductanceOverride> overrides;
  if (m == 1) return overrides;
  const int group = cluster.pieces / m;
  for (const PartialEdge& p : cluster.partial) {
    const int j = p.open_pieces / group;
    if (j == 0) continue;
    // The unexplored m - j pieces of conductance m w in series.
    overrides.push_back({p.inside, p.outside, m * p.weight / static_cast<double>(m - j)});
  }
  return overrides;
}

void cluster_capacity(const PotentialSolver& solver, ClusterResult& cluster, int m) {
  if (cluster.censored)
    throw std::invalid_argument("capacity of a censored cluster is not reported");
  if (cluster.empty()) throw std::invalid_argument("capacity of an empty cluster");
  if (m < 1) throw std::invalid_argument("subdivision must be >= 1");
  if (m == 1) {
    const double cap = solver.capacity(cluster.vertices);
    cluster.cap_discrete = cap;
    cluster.cap_refined[1] = cap;
    return;
  }
  const std::vector<ConductanceOverride> overrides = cable_overrides(cluster, m);
  cluster.cap_refined[m] = solver.capacity(cluster.vertices, overrides);
}

ConnectionIndicators connection_events(ClusterExplorer& explorer, const EdgeConfig& config,
                                       const ClusterResult& cluster,
                                       const ConnectionTargets& targets) {
  const WeightedGraph& g = explorer.graph();
  int reach = std::numeric_limits<int>::max();
  if (explorer.options().censoring == Censoring::window)
    reach = explorer.options().window;
  else if (const LatticeGeometry* box = g.lattice())
    reach = box->observation_radius;
  auto check = [&](int r) {
    if (r < 0 || r > reach)
      throw std::invalid_argument("radius " + std::to_string(r) + " exceeds the observation window");
  };
  for (int r : targets.radii) check(r);
  if (targets.ball_crossing) check(targets.ball_crossing->second);

  ConnectionIndicators out;
  out.censored = cluster.censored;
  const bool counted = !cluster.censored && !cluster.empty();
  for (int r : targets.radii) out.radius.push_back(counted && cluster.radius >= r);
  std::vector<VertexId> sorted;
  if (counted && !targets.vertices.empty()) {
    sorted = cluster.vertices;
    std::sort(sorted.begin(), sorted.end());
  }
  for (VertexId x : targets.vertices)
    out.vertex.push_back(counted && std::binary_search(sorted.begin(), sorted.end(), x));
  if (targets.ball_crossing)
    out.ball_crossing =
        explorer.crossing(config, targets.ball_crossing->first, targets.ball_crossing->second);
  return out;
}

std::vector<ClusterResult> scan_levels(ClusterExplorer& explorer, const FieldSample& field,
                                       std::span<const double> levels, EdgeMode mode,
                                       int pieces) {
  std::vector<std::size_t> order(levels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return levels[i] > levels[j]; });
  std::vector<ClusterResult> out(levels.size());
  bool censored = false;
  for (std::size_t i : order) {
    if (censored) {
      out[i].level = levels[i];
      out[i].censored = true;
      out[i].pieces = mode == EdgeMode::direct ? 1 : pieces;
      continue;
    }
    out[i] = explorer.explore(EdgeConfig(field, levels[i], mode, pieces));
    censored = out[i].censored;
  }
  return out;
}

}  // namespace cablegff
