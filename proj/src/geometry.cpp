#include "rotlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "rotlab/rng.hpp"

namespace rotlab {

DiscreteMeasure DiscreteMeasure::make(Eigen::MatrixXd points, Eigen::VectorXd weights) {
  if (points.rows() < 1 || points.cols() < 1)
    throw std::invalid_argument("measure needs n >= 1 atoms in d >= 1 dimensions");
  if (weights.size() != points.rows())
    throw std::invalid_argument("weights length must match atom count");
  if (!points.allFinite() || !weights.allFinite())
    throw std::invalid_argument("measure contains non-finite entries");
  if ((weights.array() < 0.0).any())
    throw std::invalid_argument("weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("weights must sum to 1");
  return DiscreteMeasure{std::move(points), std::move(weights)};
}

DiscreteMeasure DiscreteMeasure::uniform(Eigen::MatrixXd points) {
  const auto n = points.rows();
  return make(std::move(points), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

DiscreteMeasure DiscreteMeasure::coalesced() const {
  const int n = size(), d = dim();
  std::map<std::vector<double>, double> merged;
  std::vector<std::vector<double>> order;  // first-seen order
  std::vector<double> key(d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) key[k] = points(i, k);
    auto [it, inserted] = merged.emplace(key, 0.0);
    it->second += weights(i);
    if (inserted) order.push_back(key);
  }
  Eigen::MatrixXd pts(order.size(), d);
  Eigen::VectorXd w(order.size());
  for (size_t i = 0; i < order.size(); ++i) {
    for (int k = 0; k < d; ++k) pts(i, k) = order[i][k];
    w(i) = merged[order[i]];
  }
  w /= w.sum();
  return DiscreteMeasure{std::move(pts), std::move(w)};
}

CostSpec CostSpec::parse(const std::string& text, int dim) {
  if (text == "sqeuclidean") return CostSpec{CostKind::SqEuclidean, dim};
  if (text == "torus") return CostSpec{CostKind::TorusSqDist, dim};
  throw std::invalid_argument("unknown cost: " + text + " (expected sqeuclidean or torus)");
}

std::string CostSpec::encode() const {
  return kind == CostKind::SqEuclidean ? "sqeuclidean" : "torus";
}

static double torus_sq_dist(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    double t = std::abs(x[k] - y[k]);
    t = std::min(t, 1.0 - t);
    s += t * t;
  }
  return s;
}

double cost_eval(const CostSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != spec.dim || y.size() != spec.dim)
    throw std::invalid_argument("cost_eval: dimension mismatch");
  if (spec.kind == CostKind::SqEuclidean) return (x - y).squaredNorm();
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x[k] < 0.0 || x[k] >= 1.0 || y[k] < 0.0 || y[k] >= 1.0)
      throw std::invalid_argument("torus cost requires points in [0,1)^d");
  return torus_sq_dist(x, y);
}

CostMatrix build_cost_matrix(const DiscreteMeasure& p, const DiscreteMeasure& q,
                             const CostSpec& spec) {
  if (p.dim() != spec.dim || q.dim() != spec.dim)
    throw std::invalid_argument("build_cost_matrix: dimension mismatch");
  const int n = p.size(), m = q.size();
  CostMatrix c;
  c.values.resize(n, m);
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd y = q.points.row(j);
    for (int i = 0; i < n; ++i) c.values(i, j) = cost_eval(spec, p.points.row(i), y);
  }
  c.max_abs = c.values.cwiseAbs().maxCoeff();
  return c;
}

Eigen::MatrixXd wrap_to_unit_torus(Eigen::MatrixXd points) {
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
      double v = points(i, k) - std::floor(points(i, k));
      if (v >= 1.0) v = 0.0;  // guard against floor rounding at the boundary
      points(i, k) = v;
    }
  return points;
}

DiscreteMeasure sample_uniform_torus(int d, int n, uint64_t seed) {
  if (d < 1) throw std::invalid_argument("sample_uniform_torus: d >= 1 required");
  if (n < 1) throw std::invalid_argument("sample_uniform_torus: n >= 1 required");
  CounterRng rng(seed);
  Eigen::MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k)
      pts(i, k) = rng.uniform(static_cast<uint64_t>(i) * d + k);
  return DiscreteMeasure::uniform(std::move(pts));
}

DiscreteMeasure sample_from_discrete(const DiscreteMeasure& population, int n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_from_discrete: n >= 1 required");
  const int np = population.size();
  std::vector<double> cdf(np);
  double acc = 0.0;
  for (int i = 0; i < np; ++i) {
    acc += population.weights(i);
    cdf[i] = acc;
  }
  cdf[np - 1] = 1.0;
  CounterRng rng(seed);
  Eigen::MatrixXd pts(n, population.dim());
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform(static_cast<uint64_t>(i));
    // atom i owns [cdf[i-1], cdf[i]): first entry strictly above u
    int idx = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    idx = std::min(idx, np - 1);
    pts.row(i) = population.points.row(idx);
  }
  return DiscreteMeasure::uniform(std::move(pts));
}

}  // namespace rotlab
