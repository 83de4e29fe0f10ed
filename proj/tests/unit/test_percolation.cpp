#include <doctest.h>

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "cablegff/experiments.hpp"
#include "cablegff/gff.hpp"
#include "cablegff/graph.hpp"
#include "cablegff/percolation.hpp"
#include "cablegff/potential.hpp"
#include "cablegff/stats.hpp"

using namespace cablegff;

namespace {

LatticeSpec box(int L, int obs) {
  LatticeSpec s;
  s.dimension = 3;
  s.half_side = L;
  s.observation_radius = obs;
  return s;
}

FieldSample constant_field(const WeightedGraph& g, double value) {
  FieldSample f;
  f.domain = &g;
  f.values.assign(g.vertex_count(), 0.0);
  for (VertexId v : g.interior_vertices()) f.values[v] = value;
  return f;
}

EdgeId edge_between(const WeightedGraph& g, VertexId a, VertexId b) {
  for (const Neighbor& nb : g.neighbors(a))
    if (nb.vertex == b) return nb.edge;
  FAIL("no edge");
  return 0;
}

VertexId along_x(const WeightedGraph& g, int k) {
  const std::vector<int> c{k, 0, 0};
  return g.lattice()->vertex_at(c);
}

// Capacity density at level a: exp(-a^2 t/2) / (2 pi t sqrt(g t - 1)), t >= 1/g.
// With t = 1/g + x^2 the density in x is exp(-a^2 t/2) / (pi t sqrt g).
double rho_x(double x, double a, double g) {
  const double t = 1 / g + x * x;
  return std::exp(-a * a * t / 2) / (std::numbers::pi * t * std::sqrt(g));
}

double mass_oracle(double a, double t1, double t2, double g) {
  const double x1 = std::sqrt(std::max(t1 - 1 / g, 0.0));
  auto f = [&](double x) { return rho_x(x, a, g); };
  if (std::isinf(t2)) {
    boost::math::quadrature::exp_sinh<double> tail;
    return tail.integrate([&](double y) { return f(x1 + y); });
  }
  const double x2 = std::sqrt(t2 - 1 / g);
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, x1, x2, 15, 1e-13);
}

}  // namespace

TEST_CASE("open probability") {
  CHECK(open_probability(1.0, 1.0, 1.0) == doctest::Approx(1 - std::exp(-2.0)));
  CHECK(open_probability(1.0, -1.0, 1.0) == 0.0);
  CHECK(open_probability(3.0, 0.5, 2.0) == doctest::Approx(1 - std::exp(-6.0)));
}

TEST_CASE("cluster exploration on prescribed edges") {
  const WeightedGraph g = build_lattice(box(4, 3));
  const FieldSample f = constant_field(g, 1.0);
  std::vector<char> open(g.edge_count(), 0);
  const VertexId o = g.origin();
  open[edge_between(g, o, along_x(g, 1))] = 1;
  open[edge_between(g, along_x(g, 1), along_x(g, 2))] = 1;
  const EdgeConfig cfg = EdgeConfig::from_flags(f, 0.0, open);
  const ClusterResult c = cluster_of_origin(cfg);
  CHECK(c.bounded());
  CHECK(c.volume == 3);
  CHECK(c.radius == 2);
  CHECK(c.vertices.front() == o);

  ExploreOptions window;
  window.censoring = Censoring::window;
  window.window = 2;
  CHECK(cluster_of_origin(cfg, window).censored);

  // Open to the boundary: censored under Dirichlet censoring.
  for (int k = 2; k < 4; ++k) open[edge_between(g, along_x(g, k), along_x(g, k + 1))] = 1;
  {
    const std::vector<int> last{4, 0, 0};
    open[edge_between(g, along_x(g, 3), g.lattice()->vertex_at(last))] = 1;
  }
  CHECK(cluster_of_origin(EdgeConfig::from_flags(f, 0.0, open)).censored);

  // Level above the field: empty, and open edges there are inconsistent.
  CHECK(cluster_of_origin(EdgeConfig::from_flags(f, 2.0, std::vector<char>(g.edge_count(), 0))).empty());
  CHECK_THROWS(cluster_of_origin(EdgeConfig::from_flags(f, 2.0, open)));
}

TEST_CASE("clusters at decreasing levels are nested") {
  const WeightedGraph g = build_lattice(box(8, 6));
  const GffSampler sampler(g);
  ClusterExplorer explorer(g, {});
  const std::vector<double> levels{0.4, 0.2, 0.0, -0.1};
  for (std::uint64_t s = 0; s < 40; ++s) {
    const FieldSample f = sampler.sample(2, s);
    const auto cs = scan_levels(explorer, f, levels, EdgeMode::bridged, 8);
    REQUIRE(cs.size() == levels.size());
    for (std::size_t i = 1; i < cs.size(); ++i) {
      if (cs[i].censored || cs[i - 1].censored) {
        CHECK((cs[i].censored || !cs[i - 1].censored));
        continue;
      }
      const std::set<VertexId> big(cs[i].vertices.begin(), cs[i].vertices.end());
      for (VertexId v : cs[i - 1].vertices) CHECK(big.count(v) == 1);
    }
  }
}

TEST_CASE("refined capacities: monotone in m and equal to the explicit subdivision") {
  LatticeSpec s = box(3, 2);
  const WeightedGraph g = build_lattice(s);
  const GffSampler sampler(g);
  const PotentialSolver solver(g);
  ClusterExplorer explorer(g, {});
  int checked = 0;
  for (std::uint64_t i = 0; i < 400 && checked < 12; ++i) {
    const FieldSample f = sampler.sample(4, i);
    ClusterResult c = explorer.explore(EdgeConfig(f, 0.0, EdgeMode::bridged, 8));
    if (c.empty() || c.censored || c.partial.empty()) continue;
    ++checked;
    cluster_capacity(solver, c, 1);
    for (int m : {2, 4, 8}) cluster_capacity(solver, c, m);
    CHECK(*c.cap_discrete <= c.cap_refined[2] + 1e-12);
    CHECK(c.cap_refined[2] <= c.cap_refined[4] + 1e-12);
    CHECK(c.cap_refined[4] <= c.cap_refined[8] + 1e-12);
    CHECK(cable_overrides(c, 1).empty());

    // Oracle: add the open chain vertices on the subdivided graph.
    for (int m : {2, 4}) {
      const RefinedGraph r = refine(g, m);
      std::vector<VertexId> K(c.vertices.begin(), c.vertices.end());
      for (const PartialEdge& p : c.partial) {
        const int j = p.open_pieces / (8 / m);
        const auto& chain = r.chain[p.edge];
        const bool from_u = g.edge(p.edge).u == p.inside;
        for (int k = 0; k < j; ++k)
          K.push_back(from_u ? chain[static_cast<std::size_t>(k)]
                             : chain[chain.size() - 1 - static_cast<std::size_t>(k)]);
      }
      std::sort(K.begin(), K.end());
      K.erase(std::unique(K.begin(), K.end()), K.end());
      CHECK(PotentialSolver(r.graph).capacity(K) == doctest::Approx(c.cap_refined[m]).epsilon(1e-8));
    }
  }
  CHECK(checked > 0);
  ClusterResult dummy;
  dummy.pieces = 8;
  CHECK_THROWS(cable_overrides(dummy, 3));
}

TEST_CASE("closed-form cluster laws against quadrature") {
  const double g = 1.516386059151978 / 6;
  for (double a : {-0.5, 0.0, 0.3}) {
    CHECK(theta0_reference(a, g) == doctest::Approx(a < 0 ? 2 * normal_cdf(a, g) : 1.0));
    for (double u : {0.2, 1.0}) {
      // P(phi_0 < a) plus the transform of the capacity density
      const double oracle = normal_cdf(a, g) + [&] {
                              boost::math::quadrature::exp_sinh<double> q;
                              return q.integrate([&](double x) {
                                const double t = 1 / g + x * x;
                                return std::exp(-u * t) * rho_x(x, a, g);
                              });
                            }();
      CHECK(laplace_reference(a, u, g) == doctest::Approx(oracle).epsilon(1e-9));
    }
    for (auto [t1, t2] : {std::pair{1 / g, 5.0}, {8.0, 12.0}, {50.0, std::numeric_limits<double>::infinity()}})
      CHECK(capacity_mass_reference(a, t1, t2, g) == doctest::Approx(mass_oracle(a, t1, t2, g)).epsilon(1e-7));
  }
  for (double N : {2.0, 10.0, 100.0})
    CHECK(capacity_tail_reference(N, g) ==
          doctest::Approx(mass_oracle(0, N, std::numeric_limits<double>::infinity(), g)).epsilon(1e-9));
  CHECK(capacity_tail_reference(1.0, g) == 0.5);
  CHECK(correlation_length(0.5, 1.0) == doctest::Approx(4.0));
}
