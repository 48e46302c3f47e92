#include "rotlab/torus_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rotlab/rng.hpp"

namespace rotlab {

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

QuadratureTooCoarse::QuadratureTooCoarse(double estimate, double target)
    : std::runtime_error("quadrature error estimate " + fmt_g(estimate) +
                         " exceeds 10x the root tolerance " + fmt_g(target) +
                         "; raise the grid resolution") {}

namespace {

struct Kahan {
  double sum = 0.0, carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Squared torus distances d^2([0], [y]) at the quadrature nodes. Tensor grids
// use per-dimension midpoints folded by the min(u, 1-u) symmetry; Monte Carlo
// keeps replicate boundaries so the spread of replicate means is reportable.
struct NodeSet {
  std::vector<double> s;
  int replicates = 1;

  template <class F>
  double mean(F&& f) const {
    Kahan acc;
    for (double v : s) acc.add(f(v));
    return acc.sum / static_cast<double>(s.size());
  }

  // standard error of the replicate means (0 for a single block)
  template <class F>
  double mean_with_se(F&& f, double& se) const {
    if (replicates <= 1) {
      se = 0.0;
      return mean(f);
    }
    const long per = static_cast<long>(s.size()) / replicates;
    std::vector<double> block(replicates);
    for (int r = 0; r < replicates; ++r) {
      Kahan acc;
      for (long i = 0; i < per; ++i) acc.add(f(s[r * per + i]));
      block[r] = acc.sum / static_cast<double>(per);
    }
    Kahan m;
    for (double b : block) m.add(b);
    const double mu = m.sum / replicates;
    Kahan v;
    for (double b : block) v.add((b - mu) * (b - mu));
    se = std::sqrt(v.sum / (replicates - 1.0) / replicates);
    return mu;
  }
};

NodeSet tensor_nodes(int d, int resolution) {
  const int k = resolution / 2;
  std::vector<double> per(k);
  for (int t = 0; t < k; ++t) {
    const double u = (t + 0.5) / resolution;  // < 1/2, so min(u, 1-u) = u
    per[t] = u * u;
  }
  NodeSet nodes;
  if (d == 1) {
    nodes.s = per;
  } else if (d == 2) {
    nodes.s.resize(static_cast<size_t>(k) * k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) nodes.s[static_cast<size_t>(a) * k + b] = per[a] + per[b];
  } else {
    nodes.s.resize(static_cast<size_t>(k) * k * k);
    size_t idx = 0;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        for (int c = 0; c < k; ++c) nodes.s[idx++] = per[a] + per[b] + per[c];
  }
  return nodes;
}

NodeSet mc_nodes(int d, long per_replicate, int replicates, uint64_t seed) {
  NodeSet nodes;
  nodes.replicates = replicates;
  nodes.s.resize(static_cast<size_t>(per_replicate) * replicates);
  size_t idx = 0;
  for (int r = 0; r < replicates; ++r) {
    CounterRng rng(hash_combine(seed, static_cast<uint64_t>(r)));
    for (long i = 0; i < per_replicate; ++i) {
      double s = 0.0;
      for (int kdim = 0; kdim < d; ++kdim) {
        double u = rng.uniform(static_cast<uint64_t>(i) * d + kdim);
        u = std::min(u, 1.0 - u);
        s += u * u;
      }
      nodes.s[idx++] = s;
    }
  }
  return nodes;
}

NodeSet build_nodes(int d, const TorusQuadrature& quad, int resolution_override = 0) {
  if (quad.kind == TorusQuadrature::Kind::TensorGrid) {
    const int res = resolution_override > 0 ? resolution_override : quad.resolution;
    if (res < 4 || res % 2 != 0)
      throw std::invalid_argument("tensor quadrature resolution must be even and >= 4");
    if (d > 3) throw std::invalid_argument("tensor quadrature supports d <= 3");
    return tensor_nodes(d, res);
  }
  if (quad.nodes < 1 || quad.replicates < 2)
    throw std::invalid_argument("monte carlo quadrature needs nodes >= 1 and replicates >= 2");
  return mc_nodes(d, quad.nodes, quad.replicates, quad.seed);
}

// Root of mean psi'((2C - s)/eps) = 1 over the fixed node set; the map is
// nondecreasing in C, bisection with Newton steps on (2/eps) mean psi''.
double root_on_nodes(const NodeSet& nodes, double epsilon, const Divergence& div, int d,
                     double fn_tol) {
  auto foc = [&](double c) {
    return nodes.mean([&](double s) { return div.psi((2.0 * c - s) / epsilon, 1); }) - 1.0;
  };
  auto slope = [&](double c) {
    return 2.0 / epsilon *
           nodes.mean([&](double s) { return div.psi((2.0 * c - s) / epsilon, 2); });
  };

  double hi = div.t0() * epsilon / 2.0 + d / 8.0 + 1.0;
  double lo = -1.0;
  while (foc(lo) >= 0.0) {
    lo = 2.0 * lo - 1.0;
    if (lo < -1e6) throw std::logic_error("torus oracle: no lower bracket");
  }
  double c = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    const double h = foc(c);
    if (std::abs(h) <= fn_tol) return c;
    if (h < 0.0)
      lo = c;
    else
      hi = c;
    const double hp = slope(c);
    double next = hp > 0.0 ? c - h / hp : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(c)))
      return 0.5 * (lo + hi);
    c = next;
  }
  return c;
}

}  // namespace

TorusQuadrature TorusQuadrature::auto_for(int d) {
  TorusQuadrature q;
  if (d == 1) {
    q.kind = Kind::TensorGrid;
    q.resolution = 1 << 22;
  } else if (d == 2) {
    q.kind = Kind::TensorGrid;
    q.resolution = 1 << 12;
  } else if (d == 3) {
    q.kind = Kind::TensorGrid;
    q.resolution = 1 << 8;
  } else {
    q.kind = Kind::MonteCarlo;
    q.nodes = 1 << 18;
    q.replicates = 16;
  }
  return q;
}

std::string TorusQuadrature::describe() const {
  if (kind == Kind::TensorGrid)
    return "tensor-midpoint:" + std::to_string(resolution);
  return "monte-carlo:" + std::to_string(nodes) + "x" + std::to_string(replicates) +
         ":seed=" + std::to_string(seed);
}

double population_constant(int d, double epsilon, const Divergence& div,
                           const TorusQuadrature& quad, double* error_estimate) {
  if (d < 1) throw std::invalid_argument("population_constant: d >= 1 required");
  if (!(epsilon > 0.0)) throw std::invalid_argument("population_constant: epsilon > 0 required");
  constexpr double fn_tol = 1e-12;

  const NodeSet nodes = build_nodes(d, quad);
  const double c = root_on_nodes(nodes, epsilon, div, d, fn_tol);

  double est = 0.0;
  if (quad.kind == TorusQuadrature::Kind::TensorGrid) {
    // Richardson-style: re-evaluate the solved equation on the halved grid.
    const NodeSet coarse = build_nodes(d, quad, std::max(4, quad.resolution / 2));
    est = std::abs(
        coarse.mean([&](double s) { return div.psi((2.0 * c - s) / epsilon, 1); }) - 1.0);
    if (est > 10.0 * fn_tol) throw QuadratureTooCoarse(est, fn_tol);
  } else {
    double se = 0.0;
    nodes.mean_with_se([&](double s) { return div.psi((2.0 * c - s) / epsilon, 1); }, se);
    est = se;
  }
  if (error_estimate) *error_estimate = est;
  return c;
}

TorusPopulation make_torus_population(int d, double epsilon, const Divergence& div,
                                      const TorusQuadrature& quad) {
  TorusPopulation pop;
  pop.d = d;
  pop.epsilon = epsilon;
  pop.divergence = div;
  pop.quadrature = quad;
  pop.constant = population_constant(d, epsilon, div, quad, &pop.quadrature_error_estimate);

  const NodeSet nodes = build_nodes(d, quad);
  const double two_c = 2.0 * pop.constant;
  double se_value = 0.0;
  const double psi_mean = nodes.mean_with_se(
      [&](double s) { return div.psi((two_c - s) / epsilon, 0); }, se_value);
  pop.rot_value = two_c - epsilon * psi_mean;

  // Cross-check against the primal form through the coupling density.
  const double primal = nodes.mean([&](double s) {
    const double density = div.psi((two_c - s) / epsilon, 1);
    return s * density + epsilon * div.phi(density);
  });
  if (std::abs(primal - pop.rot_value) > 1e-9)
    throw std::logic_error("torus oracle: primal/dual cross-check failed");

  if (quad.kind == TorusQuadrature::Kind::TensorGrid) {
    const NodeSet coarse = build_nodes(d, quad, std::max(4, quad.resolution / 2));
    const double psi_coarse =
        coarse.mean([&](double s) { return div.psi((two_c - s) / epsilon, 0); });
    pop.quadrature_error_estimate = std::max(pop.quadrature_error_estimate,
                                             epsilon * std::abs(psi_mean - psi_coarse));
  } else {
    pop.quadrature_error_estimate =
        std::max(pop.quadrature_error_estimate, epsilon * se_value);
  }
  return pop;
}

TorusPopulation make_torus_population(int d, double epsilon, const Divergence& div) {
  return make_torus_population(d, epsilon, div, TorusQuadrature::auto_for(d));
}

}  // namespace rotlab
