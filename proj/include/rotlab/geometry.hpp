#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rotlab {

// Weighted point cloud on R^d: rows of `points` are atoms, `weights` are
// probability masses (nonnegative, summing to 1 within 1e-12).
struct DiscreteMeasure {
  Eigen::MatrixXd points;   // n x d
  Eigen::VectorXd weights;  // length n

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }

  // Validates invariants; throws std::invalid_argument on violation.
  static DiscreteMeasure make(Eigen::MatrixXd points, Eigen::VectorXd weights);
  // Uniform weights 1/n.
  static DiscreteMeasure uniform(Eigen::MatrixXd points);

  // Merges exactly-equal atoms, summing their weights. Resampled empirical
  // measures of a discrete population are bit-copies of population atoms, so
  // exact comparison is the right notion here.
  DiscreteMeasure coalesced() const;
};

enum class CostKind { SqEuclidean, TorusSqDist };

struct CostSpec {
  CostKind kind = CostKind::SqEuclidean;
  int dim = 1;

  static CostSpec parse(const std::string& text, int dim);
  std::string encode() const;
};

// c(x, y). SqEuclidean: ||x-y||^2. TorusSqDist: squared flat-torus distance
// sum_k min(|x_k-y_k|, 1-|x_k-y_k|)^2; torus coordinates are reduced mod 1.
double cost_eval(const CostSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct CostMatrix {
  Eigen::MatrixXd values;  // n x m
  double max_abs = 0.0;    // cached ||c||_inf over the support product
};

CostMatrix build_cost_matrix(const DiscreteMeasure& p, const DiscreteMeasure& q,
                             const CostSpec& spec);

// n i.i.d. uniform points on [0,1)^d, weights 1/n. Counter-based draws:
// identical seed gives bit-identical output regardless of thread count.
DiscreteMeasure sample_uniform_torus(int d, int n, uint64_t seed);

// Empirical measure of n i.i.d. draws from the population's categorical
// distribution; atoms are copied per draw (not coalesced), weights 1/n.
DiscreteMeasure sample_from_discrete(const DiscreteMeasure& population, int n, uint64_t seed);

// Reduces coordinates to [0,1) representatives (used on torus ingestion).
Eigen::MatrixXd wrap_to_unit_torus(Eigen::MatrixXd points);

}  // namespace rotlab
