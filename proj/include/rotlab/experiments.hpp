#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rotlab/geometry.hpp"
#include "rotlab/solver.hpp"
#include "rotlab/torus_oracle.hpp"

namespace rotlab {

// Torus self-transport rate study: |ROT_eps(P_n, Q_n) - ROT_eps(mu, mu)| over
// a grid of sample sizes, replicated with derived per-cell seeds.
struct RateExperimentConfig {
  int d = 1;
  double epsilon = 0.5;
  Divergence divergence = Divergence::quadratic();
  std::vector<int> ns = {10, 30, 100, 300, 1000, 3000};
  int reps = 30;
  uint64_t base_seed = 42;
  SolveOptions solver;
};

struct RateRecord {
  std::string divergence;
  int d = 0;
  double epsilon = 0.0;
  int n = 0;
  int rep = 0;
  uint64_t seed = 0;  // P-side sample seed; Q-side uses the side = 1 variant
  double rot_emp = 0.0;
  double rot_pop = 0.0;
  double abs_err = 0.0;  // NaN marks a cell whose solve did not converge
  int solve_iters = 0;
  double residual = 0.0;
};

// Per-cell seeds: seed(n, rep, side) = hash_combine(hash_combine(
// hash_combine(base_seed, n), rep), side), side 0 for P and 1 for Q.
uint64_t derive_cell_seed(uint64_t base_seed, int n, int rep, int side);

// Rows come back sorted by (n, rep); failed cells carry NaN markers instead
// of aborting the sweep. The overload without a population computes the
// oracle with TorusQuadrature::auto_for(d).
std::vector<RateRecord> run_rate_experiment(const RateExperimentConfig& config,
                                            const TorusPopulation& population);
std::vector<RateRecord> run_rate_experiment(const RateExperimentConfig& config);

struct SlopeFit {
  double alpha = 0.0;
  double intercept = 0.0;
  double stderr_alpha = 0.0;
  std::vector<std::pair<int, double>> per_n_means;
};

class AllZeroErrors : public std::runtime_error {
 public:
  AllZeroErrors() : std::runtime_error("fewer than two sample sizes with positive mean error") {}
};

// OLS of log(mean abs_err per n) on log n over converged records.
SlopeFit slope_fit(const std::vector<RateRecord>& records);

struct CostCltCheck {
  double sample_var = 0.0;     // variance of sqrt(n) (ROT_n - ROT) across reps
  double plugin_sigma2 = 0.0;  // plug-in estimate on the population solution
  double mean_stat = 0.0;
  int reps = 0;
};

// Monte-Carlo self-consistency check of the cost CLT on a discrete
// population. Non-KL divergences require full psi'' positivity on the
// population solution (checked, else std::invalid_argument).
CostCltCheck run_cost_clt_check(const DiscreteMeasure& p, const DiscreteMeasure& q,
                                const CostSpec& cost_spec, const Divergence& div, double epsilon,
                                int n, int reps, uint64_t base_seed,
                                const SolveOptions& solver = {});

}  // namespace rotlab
