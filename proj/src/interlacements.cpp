#include "cablegff/interlacements.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "cablegff/percolation.hpp"
#include "cablegff/rng.hpp"

namespace cablegff {

TrajectorySoup TrajectorySoup::restricted(double level) const {
  TrajectorySoup out;
  out.u = std::min(level, u);
  out.window_capacity = window_capacity;
  out.window = window;
  for (std::size_t i = 0; i < trajectories.size(); ++i)
    if (labels[i] <= level) {
      out.trajectories.push_back(trajectories[i]);
      out.labels.push_back(labels[i]);
    }
  return out;
}

SoupSampler::SoupSampler(const PotentialSolver& solver, std::span<const VertexId> window,
                         SoupPaths mode)
    : graph_(&solver.graph()), mode_(mode), equilibrium_(solver.equilibrium(window)),
      in_window_(graph_->vertex_count(), 0) {
  for (VertexId v : equilibrium_.target) in_window_[v] = 1;
  entrance_cdf_.reserve(equilibrium_.target.size());
  double acc = 0;
  for (VertexId v : equilibrium_.target) {
    acc += equilibrium_.equilibrium[v];
    entrance_cdf_.push_back(acc);
  }
}

TrajectorySoup SoupSampler::sample(double u, std::uint64_t seed,
                                   std::uint64_t sample_index) const {
  if (!(u > 0)) throw std::invalid_argument("interlacement level u must be positive");
  const WeightedGraph& g = *graph_;
  CounterRng rng(seed, stream_id(sample_index, StreamPurpose::soup));
  TrajectorySoup soup;
  soup.u = u;
  soup.window_capacity = equilibrium_.capacity;
  soup.window = equilibrium_.target;
  const std::uint64_t n = rng.poisson(u * equilibrium_.capacity);
  const double total = entrance_cdf_.back();
  for (std::uint64_t i = 0; i < n; ++i) {
    soup.labels.push_back(u * rng.uniform());
    const auto k = static_cast<std::size_t>(
        std::upper_bound(entrance_cdf_.begin(), entrance_cdf_.end(), rng.uniform() * total) -
        entrance_cdf_.begin());
    VertexId x = equilibrium_.target[std::min(k, entrance_cdf_.size() - 1)];
    std::vector<VertexId> path{x};
    const auto& h = equilibrium_.hitting;
    bool returning = false;  // inside an h-transformed excursion
    while (!g.is_boundary(x)) {
      const auto nbs = g.neighbors(x);
      VertexId next = nbs.back().vertex;
      if (returning) {
        double total_h = 0;
        for (const Neighbor& nb : nbs) total_h += nb.weight * h[nb.vertex];
        double pick = rng.uniform() * total_h;
        for (const Neighbor& nb : nbs) {
          pick -= nb.weight * h[nb.vertex];
          if (pick < 0 && h[nb.vertex] > 0) {
            next = nb.vertex;
            break;
          }
        }
      } else {
        double pick = rng.uniform() * g.vertex_weight(x);
        for (const Neighbor& nb : nbs) {
          pick -= nb.weight;
          if (pick < 0) {
            next = nb.vertex;
            break;
          }
        }
      }
      const bool left = in_window_[x] && !in_window_[next];
      x = next;
      path.push_back(x);
      if (in_window_[x]) {
        returning = false;
      } else if (mode_ == SoupPaths::window_trace && left) {
        if (!(rng.uniform() < h[x])) break;  // never comes back
        returning = true;
      }
    }
    soup.trajectories.push_back(std::move(path));
  }
  return soup;
}

TrajectorySoup sample_soup(const PotentialSolver& solver, std::span<const VertexId> window,
                           double u, std::uint64_t seed, std::uint64_t sample_index) {
  return SoupSampler(solver, window).sample(u, seed, sample_index);
}

bool avoids(const TrajectorySoup& soup, std::span<const VertexId> set) {
  std::vector<VertexId> sorted(set.begin(), set.end());
  std::sort(sorted.begin(), sorted.end());
  for (const auto& path : soup.trajectories)
    for (VertexId v : path)
      if (std::binary_search(sorted.begin(), sorted.end(), v)) return false;
  return true;
}

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) { parent[find(a)] = find(b); }
};

}  // namespace

bool loc_uniq(const TrajectorySoup& soup, const WeightedGraph& graph, VertexId z, int radius,
              double lambda_factor, double level) {
  if (radius < 0 || !(lambda_factor >= 1.0))
    throw std::invalid_argument("need R >= 0 and lambda_factor >= 1");
  const int outer = static_cast<int>(std::floor(lambda_factor * radius));
  const std::vector<VertexId> big = ball(graph, z, outer);
  for (VertexId v : big)
    if (!std::binary_search(soup.window.begin(), soup.window.end(), v))
      throw std::invalid_argument("B(z, lambda R) leaves the soup window");
  std::unordered_map<VertexId, std::uint32_t> local;
  local.reserve(big.size() * 2);
  for (VertexId v : big) local.emplace(v, static_cast<std::uint32_t>(local.size()));
  const std::vector<int> dist = [&] {
    std::vector<int> d(big.size());
    for (std::size_t i = 0; i < big.size(); ++i) d[i] = graph_distance(graph, z, big[i]);
    return d;
  }();
  UnionFind uf(big.size());
  std::vector<char> seen(big.size(), 0);
  for (std::size_t t = 0; t < soup.trajectories.size(); ++t) {
    if (soup.labels[t] > level) continue;
    const auto& path = soup.trajectories[t];
    std::int64_t prev = -1;
    for (VertexId v : path) {
      const auto it = local.find(v);
      const std::int64_t cur = it == local.end() ? std::int64_t{-1} : std::int64_t{it->second};
      if (cur >= 0) {
        if (dist[static_cast<std::size_t>(cur)] <= radius) seen[static_cast<std::size_t>(cur)] = 1;
        if (prev >= 0) uf.unite(static_cast<std::uint32_t>(prev), static_cast<std::uint32_t>(cur));
      }
      prev = cur;
    }
  }
  std::int64_t root = -1;
  for (std::size_t i = 0; i < big.size(); ++i) {
    if (!seen[i]) continue;
    const auto r = static_cast<std::int64_t>(uf.find(static_cast<std::uint32_t>(i)));
    if (root < 0) root = r;
    else if (r != root) return false;
  }
  return true;
}

CouplingComparison coupling_consequence(const GffSampler& sampler, const PotentialSolver& solver,
                                        double a, int r, std::size_t samples,
                                        std::uint64_t seed) {
  const WeightedGraph& g = solver.graph();
  if (const LatticeGeometry* box = g.lattice(); box && 4 * r > box->observation_radius)
    throw std::invalid_argument("4r must not exceed the observation window");
  CouplingComparison out;
  out.a = a;
  out.r = r;
  out.u = a * a / 2;
  const std::vector<VertexId> inner = ball(g, g.origin(), r);
  out.cap_ball = solver.capacity(inner);
  out.soup_exact = -std::expm1(-out.u * out.cap_ball);
  ClusterExplorer explorer(g, {});
  std::vector<char> in_inner(g.vertex_count(), 0);
  for (VertexId v : inner) in_inner[v] = 1;
  const auto dist = explorer.distances();
  std::unique_ptr<SoupSampler> soups;
  if (out.u > 0) soups = std::make_unique<SoupSampler>(solver, inner);
  for (std::size_t s = 0; s < samples; ++s) {
    const FieldSample field = sampler.sample(seed, s);
    out.gff_crossing.add(explorer.crossing(EdgeConfig(field, -a), r, 4 * r));
    if (!soups) {
      out.soup_crossing.add(false);
      continue;
    }
    const TrajectorySoup soup = soups->sample(out.u, seed, s);
    bool crossed = false;
    for (const auto& path : soup.trajectories) {
      for (VertexId v : path)
        if (dist[v] >= 4 * r) {
          crossed = true;
          break;
        }
      if (crossed) break;
    }
    out.soup_crossing.add(crossed);
  }
  return out;
}

}  // namespace cablegff
