#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cablegff/gff.hpp"
#include "cablegff/graph.hpp"
#include "cablegff/percolation.hpp"
#include "cablegff/potential.hpp"

namespace cablegff {

struct ExperimentConfig {
  LatticeSpec lattice;
  int m = 1;                       // subdivision reported as cap_refined
  int pieces = 8;                  // finest cable resolution sampled
  std::size_t n_samples = 10000;
  std::uint64_t seed = 1;
  int workers = 1;
  Censoring censoring = Censoring::dirichlet_boundary;
  double k_sigma = 3.0;
  double truncation_margin = 0.02;
  double relative_tolerance = 0.15;  // secant slope at criticality
  double tail_relative_tolerance = 0.25;
  double kappa_tolerance = 0.1;
  double onearm_tolerance = 0.15;
  double twopoint_exponent_lo = -1.35;
  double twopoint_exponent_hi = -0.7;
  double r2_min = 0.98;
  double volume_tail_lo = -0.35;
  double volume_tail_hi = -0.12;
  double interlacement_sigma = 4.0;
  double locuniq_threshold = 0.05;
  double locuniq_scale = 20.0;  // u R^nu from which failures must be rare
  double u = 1.0;
  double h = 0.05;             // finite-difference step in a
  int r_K = 8;                 // ball K of the local experiments
  int r0 = 4;                  // radius event inside K
  double lambda_factor = 4.0;  // local uniqueness
  std::vector<int> green_sweep{16, 32, 64};
  std::string out_dir = ".";

  // Empty grids take per-experiment defaults.
  std::vector<double> a_grid;
  std::vector<int> r_grid;
  std::vector<double> u_grid;
  std::vector<double> b_grid;
  std::vector<int> R_grid;
  std::vector<int> m_grid;
  std::vector<int> x_grid;     // two-point distances along the first axis
  std::vector<double> N_grid;  // capacity tail thresholds
  std::vector<double> t_bins;  // capacity histogram edges
};

enum class Provenance : std::uint8_t { exact_formula, exact_solve, none };
const char* to_string(Provenance p) noexcept;

struct EstimateRecord {
  std::string name;
  std::vector<std::pair<std::string, double>> parameters;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n = 0;
  std::optional<double> reference;
  Provenance provenance = Provenance::none;
  // Set when the record is a verification: true iff within tolerance.
  std::optional<bool> within_tolerance;
  double tolerance = 0.0;  // the allowance actually applied
  std::string note;

  std::optional<double> param(const std::string& key) const;
};

// Tidy per-sample table; each row is one preformatted CSV line.
struct Table {
  std::vector<std::string> header;
  std::vector<std::string> rows;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<EstimateRecord> records;
  Table samples;

  bool failed() const;
  const EstimateRecord* find(const std::string& name,
                             std::initializer_list<std::pair<const char*, double>> params = {}) const;
};

// Shared state for one lattice: graph, solver, sampler, reference g.
class ExperimentContext {
 public:
  explicit ExperimentContext(const ExperimentConfig& config);

  const ExperimentConfig& config() const noexcept { return config_; }
  const WeightedGraph& graph() const noexcept { return graph_; }
  const PotentialSolver& solver() const noexcept { return *solver_; }
  const GffSampler& sampler() const noexcept { return *sampler_; }

  double g_box() const noexcept { return g_box_; }  // g_U(0,0)
  // L-extrapolated g(0,0) for unit lattices (computed on first use), else g_U.
  double g_reference();
  const GreenExtrapolation* extrapolation() const noexcept { return extrapolation_.get(); }

  ExploreOptions explore_options() const;

 private:
  ExperimentConfig config_;
  WeightedGraph graph_;
  std::unique_ptr<PotentialSolver> solver_;
  std::unique_ptr<GffSampler> sampler_;
  double g_box_ = 0.0;
  std::unique_ptr<GreenExtrapolation> extrapolation_;
};

// Calls work(worker, sample) for every sample, split in contiguous blocks.
void parallel_samples(std::size_t samples, int workers,
                      const std::function<void(int, std::size_t)>& work);

// Cluster law references with variance g.
double theta0_reference(double a, double g);
double laplace_reference(double a, double u, double g);
// P(cap >= t) at level 0.
double capacity_tail_reference(double t, double g);
// int_{t1}^{t2} rho_a(t) dt.
double capacity_mass_reference(double a, double t1, double t2, double g);
double correlation_length(double a, double nu);

ExperimentResult run_theta0(ExperimentContext& ctx);
ExperimentResult run_capacity(ExperimentContext& ctx);
ExperimentResult run_onearm(ExperimentContext& ctx);
ExperimentResult run_twopoint(ExperimentContext& ctx);
ExperimentResult run_volume(ExperimentContext& ctx);
ExperimentResult run_diff_formula(ExperimentContext& ctx);
ExperimentResult run_com_inequality(ExperimentContext& ctx);
ExperimentResult run_emptiness(ExperimentContext& ctx);
ExperimentResult run_locuniq(ExperimentContext& ctx);
ExperimentResult run_potential_selftest(ExperimentContext& ctx);
ExperimentResult run_gff_selftest(ExperimentContext& ctx);

}  // namespace cablegff
