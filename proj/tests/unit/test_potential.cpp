#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cablegff/graph.hpp"
#include "cablegff/potential.hpp"

using namespace cablegff;

namespace {

// Dense oracle: g_U is the inverse of the weighted Dirichlet Laplacian on the interior.
struct Dense {
  const WeightedGraph* g;
  Eigen::MatrixXd G;

  explicit Dense(const WeightedGraph& graph) : g(&graph) {
    const auto n = static_cast<Eigen::Index>(graph.interior_count());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const VertexId v = graph.interior_vertex(static_cast<std::size_t>(i));
      for (const Neighbor& nb : graph.neighbors(v)) {
        A(i, i) += nb.weight;
        const auto j = graph.interior_index(nb.vertex);
        if (j >= 0) A(i, j) -= nb.weight;
      }
    }
    G = A.inverse();
  }
  double green(VertexId x, VertexId y) const {
    return G(g->interior_index(x), g->interior_index(y));
  }
  double capacity(const std::vector<VertexId>& K) const {
    const auto k = static_cast<Eigen::Index>(K.size());
    Eigen::MatrixXd GK(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) GK(i, j) = green(K[i], K[j]);
    return GK.ldlt().solve(Eigen::VectorXd::Ones(k)).sum();
  }
};

LatticeSpec spec(int L, bool random) {
  LatticeSpec s;
  s.dimension = 3;
  s.half_side = L;
  s.observation_radius = L - 1;
  if (random) {
    s.weight_mode = WeightMode::uniformly_elliptic_random;
    s.weight_low = 0.5;
    s.weight_high = 2.0;
    s.weight_seed = 3;
  }
  return s;
}

}  // namespace

TEST_CASE("green function matches the dense inverse") {
  for (bool random : {false, true}) {
    CAPTURE(random);
    const WeightedGraph g = build_lattice(spec(3, random));
    const Dense oracle(g);
    const PotentialSolver solver(g);
    CHECK((solver.spectrum() != nullptr) == !random);
    const VertexId o = g.origin();
    const GreenTable col = solver.green_column(o);
    for (VertexId v : g.interior_vertices()) CHECK(col.values[v] == doctest::Approx(oracle.green(o, v)).epsilon(1e-10));
    for (VertexId v = 0; v < g.vertex_count(); ++v)
      if (g.is_boundary(v)) CHECK(col.values[v] == 0.0);
    const VertexId y = ball(g, o, 2).back();
    CHECK(solver.green(y, o) == doctest::Approx(oracle.green(y, o)).epsilon(1e-10));
  }
}

TEST_CASE("capacities match the dense oracle") {
  for (bool random : {false, true}) {
    CAPTURE(random);
    const WeightedGraph g = build_lattice(spec(3, random));
    const Dense oracle(g);
    const PotentialSolver solver(g);
    const VertexId o = g.origin();
    std::vector<std::vector<VertexId>> sets{{o}, ball(g, o, 1), ball(g, o, 2)};
    // an irregular set: a segment plus a far point
    auto seg = ball(g, o, 1);
    seg.resize(3);
    seg.push_back(ball(g, o, 2).back());
    sets.push_back(seg);
    for (const auto& K : sets) {
      const PotentialSolve eq = solver.equilibrium(K);
      CHECK(eq.capacity == doctest::Approx(oracle.capacity(K)).epsilon(1e-9));
      for (VertexId v : K) CHECK(eq.hitting[v] == doctest::Approx(1.0));
      double sum = 0;
      for (double e : eq.equilibrium) sum += e;
      CHECK(sum == doctest::Approx(eq.capacity));
    }
    CHECK(solver.capacity(std::vector<VertexId>{o}) * oracle.green(o, o) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("region green and overrides") {
  const WeightedGraph g = build_lattice(spec(4, false));
  const PotentialSolver solver(g);
  const VertexId o = g.origin();
  const auto region_set = ball(g, o, 3);
  const RegionGreen region(solver, region_set);
  const auto K = ball(g, o, 1);
  CHECK(region.covers(o));
  CHECK(region.capacity(K) == doctest::Approx(solver.capacity(K)).epsilon(1e-10));

  // A larger conductance on an outgoing edge raises capacity; the same
  // override through the solver and the region agrees.
  VertexId outside = 0;
  for (const Neighbor& nb : g.neighbors(K.back()))
    if (std::find(K.begin(), K.end(), nb.vertex) == K.end()) outside = nb.vertex;
  const std::vector<ConductanceOverride> ov{{K.back(), outside, 4.0}};
  const double base = solver.capacity(K);
  const double raised = solver.capacity(K, ov);
  CHECK(raised > base);
  CHECK(region.capacity(K, ov) == doctest::Approx(raised).epsilon(1e-9));
  // Oracle: put the extra conductance on the graph and solve again.
  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  for (Edge& e : edges)
    if ((e.u == K.back() && e.v == outside) || (e.v == K.back() && e.u == outside)) e.weight = 4.0;
  std::vector<VertexKind> kinds;
  for (VertexId v = 0; v < g.vertex_count(); ++v) kinds.push_back(g.kind(v));
  GraphMetadata meta;
  meta.origin = o;
  const WeightedGraph modified(g.vertex_count(), edges, kinds, meta);
  CHECK(PotentialSolver(modified).capacity(K) == doctest::Approx(raised).epsilon(1e-9));
}

TEST_CASE("harmonic extension") {
  const WeightedGraph g = build_lattice(spec(3, true));
  const PotentialSolver solver(g);
  const auto K = ball(g, g.origin(), 1);
  const std::vector<double> ones(K.size(), 1.0);
  const auto h = solver.harmonic_extension(K, ones);
  const PotentialSolve eq = solver.equilibrium(K);
  for (VertexId v = 0; v < g.vertex_count(); ++v) CHECK(h[v] == doctest::Approx(eq.hitting[v]).epsilon(1e-9));
  // harmonic off K
  for (VertexId v : g.interior_vertices()) {
    if (std::find(K.begin(), K.end(), v) != K.end()) continue;
    double s = 0;
    for (const Neighbor& nb : g.neighbors(v)) s += nb.weight * h[nb.vertex];
    CHECK(s == doctest::Approx(g.vertex_weight(v) * h[v]).epsilon(1e-8));
  }
}

TEST_CASE("identities and known values") {
  LatticeSpec s = spec(16, false);
  s.observation_radius = 10;
  const WeightedGraph g = build_lattice(s);
  const PotentialSolver solver(g);
  const VertexId o = g.origin();
  CHECK(solver.green(o, o) == doctest::Approx(0.248381553).epsilon(1e-8));
  const std::vector<VertexId> point{o};
  CHECK(sweeping_check(solver, point, ball(g, o, 2)) < 1e-8);
  CHECK(potential_identity_check(solver, ball(g, o, 2)) < 1e-8);
  const std::vector<int> radii{0, 1, 2};
  const auto prof = ball_capacity_profile(solver, o, radii);
  CHECK(prof.size() == 3);
  CHECK(prof[0].second < prof[1].second);
  CHECK(prof[1].second < prof[2].second);
  const std::vector<int> too_far{11};
  CHECK_THROWS(ball_capacity_profile(solver, o, too_far));
}

TEST_CASE("green extrapolation approaches Watson's constant") {
  const GreenExtrapolation ex = extrapolate_origin_green(3, {8, 16, 32});
  CHECK(ex.values.size() == 3);
  CHECK(ex.values[0] < ex.values[1]);
  CHECK(std::abs(ex.limit - 1.516386059151978 / 6) < 2e-4);
}
