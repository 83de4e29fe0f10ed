#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "cablegff/graph.hpp"

using namespace cablegff;

namespace {
LatticeSpec box(int d, int L, int obs) {
  LatticeSpec s;
  s.dimension = d;
  s.half_side = L;
  s.observation_radius = obs;
  return s;
}
}  // namespace

TEST_CASE("lattice box sizes and origin") {
  const WeightedGraph g = build_lattice(box(3, 4, 2));
  CHECK(g.vertex_count() == 9u * 9 * 9);
  CHECK(g.interior_count() == 7u * 7 * 7);
  // every interior vertex has 2d neighbours of weight 1
  for (VertexId v : g.interior_vertices()) {
    CHECK(g.neighbors(v).size() == 6);
    CHECK(g.vertex_weight(v) == doctest::Approx(6.0));
  }
  const auto c = g.lattice()->coordinates(g.origin());
  CHECK(c == std::vector<int>{0, 0, 0});
  CHECK_FALSE(g.is_boundary(g.origin()));
  g.check_invariants();
}

TEST_CASE("coordinates round trip") {
  const WeightedGraph g = build_lattice(box(4, 2, 1));
  const LatticeGeometry& geo = *g.lattice();
  for (VertexId v = 0; v < g.vertex_count(); v += 7) CHECK(geo.vertex_at(geo.coordinates(v)) == v);
  CHECK(geo.side() == 5);
}

TEST_CASE("l1 balls in Z^3") {
  const WeightedGraph g = build_lattice(box(3, 8, 5));
  // |B(r)| = (2r+1)(2r^2+2r+3)/3
  for (int r : {0, 1, 2, 3, 4}) {
    const auto b = ball(g, g.origin(), r);
    CHECK(b.size() == static_cast<std::size_t>((2 * r + 1) * (2 * r * r + 2 * r + 3) / 3));
    for (VertexId v : b) CHECK(graph_distance(g, g.origin(), v) <= r);
  }
  const auto d = distances_from(g, g.origin());
  CHECK(d[g.origin()] == 0);
  CHECK(std::count(d.begin(), d.end(), 1) == 6);
}

TEST_CASE("random weights are reproducible and bounded") {
  LatticeSpec s = box(3, 3, 1);
  s.weight_mode = WeightMode::uniformly_elliptic_random;
  s.weight_low = 0.5;
  s.weight_high = 2.0;
  s.weight_seed = 9;
  const WeightedGraph a = build_lattice(s), b = build_lattice(s);
  s.weight_seed = 10;
  const WeightedGraph c = build_lattice(s);
  bool differ = false;
  for (EdgeId e = 0; e < a.edge_count(); ++e) {
    CHECK(a.edge(e).weight == b.edge(e).weight);
    CHECK(a.edge(e).weight >= 0.5);
    CHECK(a.edge(e).weight <= 2.0);
    differ |= a.edge(e).weight != c.edge(e).weight;
  }
  CHECK(differ);
  CHECK_FALSE(a.is_unit_lattice());
  a.check_invariants();
}

TEST_CASE("invariant violations throw") {
  const std::vector<VertexKind> kinds{VertexKind::interior, VertexKind::interior,
                                      VertexKind::dirichlet, VertexKind::interior};
  // vertex 3 is cut off from the rest
  CHECK_THROWS_AS(WeightedGraph(4, {{0, 1, 1.0}, {1, 2, 1.0}}, kinds).check_invariants(),
                  GraphError);
  CHECK_THROWS_AS(WeightedGraph(3, {{0, 1, -1.0}, {1, 2, 1.0}},
                                {kinds.begin(), kinds.begin() + 3})
                      .check_invariants(),
                  GraphError);
  CHECK_THROWS_AS(WeightedGraph(3, {{0, 0, 1.0}, {1, 2, 1.0}},
                                {kinds.begin(), kinds.begin() + 3})
                      .check_invariants(),
                  GraphError);
}

TEST_CASE("refinement keeps ids and series conductance") {
  const WeightedGraph g = build_lattice(box(3, 2, 1));
  const RefinedGraph r = refine(g, 4);
  CHECK(r.subdivision == 4);
  CHECK(r.base_vertex_count == g.vertex_count());
  CHECK(r.graph.vertex_count() == g.vertex_count() + 3 * g.edge_count());
  CHECK(r.graph.origin() == g.origin());
  r.graph.check_invariants();
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    REQUIRE(r.chain[e].size() == 3);
    // walk the chain: u - c0 - c1 - c2 - v, each piece of weight 4 w
    std::vector<VertexId> path{g.edge(e).u};
    path.insert(path.end(), r.chain[e].begin(), r.chain[e].end());
    path.push_back(g.edge(e).v);
    double resistance = 0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      double w = 0;
      for (const Neighbor& nb : r.graph.neighbors(path[i]))
        if (nb.vertex == path[i + 1]) w = nb.weight;
      REQUIRE(w > 0);
      resistance += 1 / w;
    }
    CHECK(1 / resistance == doctest::Approx(g.edge(e).weight));
  }
  CHECK_THROWS(refine(g, 0));
}

TEST_CASE("ball rejects boundary centres and negative radii") {
  const WeightedGraph g = build_lattice(box(3, 2, 1));
  VertexId boundary = 0;
  CHECK(g.is_boundary(boundary));
  CHECK_THROWS_AS(ball(g, boundary, 1), GraphError);
  CHECK_THROWS_AS(ball(g, g.origin(), -1), GraphError);
}

TEST_CASE("graph csv lists every edge") {
  const WeightedGraph g = build_lattice(box(3, 1, 0));
  std::ostringstream os;
  write_graph_csv(os, g);
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') >= static_cast<long>(g.edge_count()));
}
