#include "rotlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rotlab/linearization.hpp"
#include "rotlab/inference.hpp"
#include "rotlab/rng.hpp"

namespace rotlab {

uint64_t derive_cell_seed(uint64_t base_seed, int n, int rep, int side) {
  return hash_combine(hash_combine(hash_combine(base_seed, static_cast<uint64_t>(n)),
                                   static_cast<uint64_t>(rep)),
                      static_cast<uint64_t>(side));
}

std::vector<RateRecord> run_rate_experiment(const RateExperimentConfig& config,
                                            const TorusPopulation& population) {
  if (config.reps < 1) throw std::invalid_argument("rate experiment: reps >= 1 required");
  for (size_t i = 1; i < config.ns.size(); ++i)
    if (config.ns[i] <= config.ns[i - 1])
      throw std::invalid_argument("rate experiment: ns must be strictly increasing");
  if (population.d != config.d || population.epsilon != config.epsilon)
    throw std::invalid_argument("rate experiment: population does not match config");

  const CostSpec cost{CostKind::TorusSqDist, config.d};
  std::vector<RateRecord> records;
  records.reserve(config.ns.size() * config.reps);
  for (int n : config.ns) {
    for (int rep = 0; rep < config.reps; ++rep) {
      RateRecord rec;
      rec.divergence = config.divergence.encode();
      rec.d = config.d;
      rec.epsilon = config.epsilon;
      rec.n = n;
      rec.rep = rep;
      rec.seed = derive_cell_seed(config.base_seed, n, rep, 0);
      rec.rot_pop = population.rot_value;
      const auto pn = sample_uniform_torus(config.d, n, rec.seed);
      const auto qn =
          sample_uniform_torus(config.d, n, derive_cell_seed(config.base_seed, n, rep, 1));
      try {
        const Solution sol = solve(pn, qn, cost, config.divergence, config.epsilon, config.solver);
        rec.rot_emp = sol.primal_value;
        rec.abs_err = std::abs(rec.rot_emp - rec.rot_pop);
        rec.solve_iters = sol.iterations;
        rec.residual = sol.residual;
      } catch (const NoConvergence& e) {
        rec.rot_emp = std::numeric_limits<double>::quiet_NaN();
        rec.abs_err = std::numeric_limits<double>::quiet_NaN();
        rec.solve_iters = e.iterations;
        rec.residual = e.residual;
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<RateRecord> run_rate_experiment(const RateExperimentConfig& config) {
  const TorusPopulation pop =
      make_torus_population(config.d, config.epsilon, config.divergence);
  return run_rate_experiment(config, pop);
}

SlopeFit slope_fit(const std::vector<RateRecord>& records) {
  std::vector<std::pair<int, std::pair<double, int>>> groups;  // n -> (sum, count)
  for (const auto& rec : records) {
    if (!std::isfinite(rec.abs_err)) continue;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == rec.n; });
    if (it == groups.end()) {
      groups.push_back({rec.n, {rec.abs_err, 1}});
    } else {
      it->second.first += rec.abs_err;
      it->second.second += 1;
    }
  }
  std::sort(groups.begin(), groups.end());

  SlopeFit fit;
  std::vector<double> xs, ys;
  for (const auto& [n, agg] : groups) {
    const double mean = agg.first / agg.second;
    fit.per_n_means.push_back({n, mean});
    if (mean > 0.0) {
      xs.push_back(std::log(static_cast<double>(n)));
      ys.push_back(std::log(mean));
    }
  }
  if (xs.size() < 2) throw AllZeroErrors();

  const double k = static_cast<double>(xs.size());
  double xbar = 0.0, ybar = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= k;
  ybar /= k;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  fit.alpha = sxy / sxx;
  fit.intercept = ybar - fit.alpha * xbar;
  double rss = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.alpha * xs[i]);
    rss += r * r;
  }
  fit.stderr_alpha = k > 2.0 ? std::sqrt(rss / (k - 2.0) / sxx) : 0.0;
  return fit;
}

CostCltCheck run_cost_clt_check(const DiscreteMeasure& p, const DiscreteMeasure& q,
                                const CostSpec& cost_spec, const Divergence& div, double epsilon,
                                int n, int reps, uint64_t base_seed, const SolveOptions& solver) {
  if (n < 1 || reps < 2) throw std::invalid_argument("cost clt check: n >= 1, reps >= 2");
  const Solution pop_sol = solve(p, q, cost_spec, div, epsilon, solver);
  if (div.family() != DivergenceFamily::KL) {
    const auto diag = diagnostics(pop_sol);
    if (diag.positivity_fraction < 1.0)
      throw std::invalid_argument(
          "cost clt check: non-KL divergence requires full psi'' positivity on the population");
  }
  const double rot_pop = pop_sol.primal_value;
  const double plugin = cost_clt_variance(pop_sol).sigma2;

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  double mean = 0.0, m2 = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    const auto pn =
        sample_from_discrete(p, n, derive_cell_seed(base_seed, n, rep, 0)).coalesced();
    const auto qn =
        sample_from_discrete(q, n, derive_cell_seed(base_seed, n, rep, 1)).coalesced();
    const Solution sol = solve(pn, qn, cost_spec, div, epsilon, solver);
    const double stat = sqrt_n * (sol.primal_value - rot_pop);
    const double delta = stat - mean;
    mean += delta / (rep + 1);
    m2 += delta * (stat - mean);
  }
  CostCltCheck out;
  out.sample_var = m2 / (reps - 1);
  out.plugin_sigma2 = plugin;
  out.mean_stat = mean;
  out.reps = reps;
  return out;
}

}  // namespace rotlab
