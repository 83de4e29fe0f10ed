#pragma once

// Internal helpers shared by the experiment translation units.

#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "cablegff/experiments.hpp"
#include "cablegff/stats.hpp"

namespace cablegff::detail {

inline std::string num(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string num(std::uint64_t x) { return std::to_string(x); }
inline std::string num(int x) { return std::to_string(x); }

// One CSV line from already formatted fields.
inline std::string csv_line(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += f;
    first = false;
  }
  return out;
}

inline EstimateRecord make_record(std::string name,
                                  std::vector<std::pair<std::string, double>> params,
                                  double estimate, double se, std::uint64_t n) {
  EstimateRecord r;
  r.name = std::move(name);
  r.parameters = std::move(params);
  r.estimate = estimate;
  r.stderr_ = se;
  r.n = n;
  return r;
}

// |estimate - reference| <= allowance.
inline void verify(EstimateRecord& r, double reference, Provenance p, double allowance) {
  r.reference = reference;
  r.provenance = p;
  r.tolerance = allowance;
  r.within_tolerance = std::abs(r.estimate - reference) <= allowance;
}

// Reference only, no verdict.
inline void annotate(EstimateRecord& r, double reference, Provenance p) {
  r.reference = reference;
  r.provenance = p;
}

inline EstimateRecord proportion_record(std::string name,
                                        std::vector<std::pair<std::string, double>> params,
                                        const Proportion& p) {
  auto [lo, hi] = p.wilson();
  params.emplace_back("wilson_lo", lo);
  params.emplace_back("wilson_hi", hi);
  return make_record(std::move(name), std::move(params), p.estimate(), p.stderr_of_mean(),
                     p.trials);
}

template <class T>
std::vector<T> or_default(const std::vector<T>& grid, std::vector<T> fallback) {
  return grid.empty() ? std::move(fallback) : grid;
}

// Vertex at (d, 0, ..., 0) of a box.
VertexId axis_vertex(const WeightedGraph& graph, int distance);

// Per-sample rows collected by index, then concatenated in order.
struct RowSink {
  std::vector<std::vector<std::string>> per_sample;  // CSV lines
  explicit RowSink(std::size_t n) : per_sample(n) {}
  void flush(Table& table) {
    for (auto& rows : per_sample)
      for (auto& row : rows) table.rows.push_back(std::move(row));
    per_sample.clear();
  }
};

inline const std::vector<std::string> kPercolationHeader{
    "seed", "sample", "a", "phi0", "bounded", "radius", "volume", "cap_discrete", "cap_refined",
    "m"};

}  // namespace cablegff::detail
