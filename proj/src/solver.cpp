#include "rotlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rotlab {

namespace {

// Compensated accumulation; keeps the half-step monotonicity certificate
// meaningful at 1e-12 slack even for n*m in the millions.
struct Kahan {
  double sum = 0.0, carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Closed-form psi kernels so the hot loops avoid a per-element switch.
struct KernelKL {
  double p0(double t) const { return std::exp(t - 1.0); }
  double p1(double t) const { return std::exp(t - 1.0); }
  double p2(double t) const { return std::exp(t - 1.0); }
};
struct KernelQuad {
  double p0(double t) const { return t > 0.0 ? 0.5 * t * t + 0.5 : 0.5; }
  double p1(double t) const { return t > 0.0 ? t : 0.0; }
  double p2(double t) const { return t > 0.0 ? 1.0 : 0.0; }
};
struct KernelCubic {  // Tsallis alpha = 3/2, psi(y) = y_+^3/3 + 2/3
  double p0(double t) const { return t > 0.0 ? t * t * t / 3.0 + 2.0 / 3.0 : 2.0 / 3.0; }
  double p1(double t) const { return t > 0.0 ? t * t : 0.0; }
  double p2(double t) const { return t > 0.0 ? 2.0 * t : 0.0; }
};
struct KernelTsallis {
  double beta, inv_alpha;
  double p0(double t) const { return t > 0.0 ? std::pow(t, beta) / beta + inv_alpha : inv_alpha; }
  double p1(double t) const { return t > 0.0 ? std::pow(t, beta - 1.0) : 0.0; }
  double p2(double t) const { return t > 0.0 ? (beta - 1.0) * std::pow(t, beta - 2.0) : 0.0; }
};

template <class Fn>
auto with_kernel(const Divergence& div, Fn&& fn) {
  switch (div.family()) {
    case DivergenceFamily::KL:
      return fn(KernelKL{});
    case DivergenceFamily::Quadratic:
      return fn(KernelQuad{});
    case DivergenceFamily::Tsallis:
      if (div.beta() == 3.0) return fn(KernelCubic{});
      return fn(KernelTsallis{div.beta(), 1.0 / div.alpha()});
  }
  throw std::logic_error("unreachable divergence family");
}

// Root of h(s) = sum_j w_j psi'(s + a_j) - 1 on the guaranteed bracket
// [t0 - max a, t0 - min a] (h <= 0 at the left end, >= 0 at the right end
// since psi' is nondecreasing with psi'(t0) = 1). Newton steps accelerated by
// psi'', bisection as safeguard.
template <class K>
double atom_root(const K& kern, const double* a, const double* w, int m, double t0,
                 double root_tol, double warm, bool has_warm, double& abs_h_out) {
  double amax = -std::numeric_limits<double>::infinity();
  double amin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j) {
    amax = std::max(amax, a[j]);
    amin = std::min(amin, a[j]);
  }
  double lo = t0 - amax, hi = t0 - amin;
  if (!(hi > lo)) {  // all offsets equal: root is exact
    abs_h_out = 0.0;
    return lo;
  }

  auto eval = [&](double s, double& h, double& hp) {
    double sh = 0.0, shp = 0.0;
    for (int j = 0; j < m; ++j) {
      const double t = s + a[j];
      sh += w[j] * kern.p1(t);
      shp += w[j] * kern.p2(t);
    }
    h = sh - 1.0;
    hp = shp;
  };

  double s = has_warm ? std::clamp(warm, lo, hi) : 0.5 * (lo + hi);
  double h = 0.0, hp = 0.0;
  for (int it = 0; it < 200; ++it) {
    eval(s, h, hp);
    if (std::abs(h) <= root_tol) break;
    if (h < 0.0)
      lo = s;
    else
      hi = s;
    const double width = hi - lo;
    if (width <= 1e-14 ||
        width <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) {
      s = 0.5 * (lo + hi);
      eval(s, h, hp);
      break;
    }
    double next = (hp > 0.0) ? s - h / hp : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    s = next;
  }
  abs_h_out = std::abs(h);
  return s;
}

// One conjugation block. M is (k x r) column-major: column i holds the costs
// from all k opposite atoms to target atom i; z/w are the opposite side's
// potentials and weights. Parallel over target atoms; each root is a
// self-contained scalar solve, so results are thread-count independent.
Eigen::VectorXd conjugate_block(const Eigen::MatrixXd& m_cost, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& w, const Divergence& div, double t0,
                                double root_tol, const Eigen::VectorXd* warm, double& max_h) {
  const int k = static_cast<int>(m_cost.rows());
  const int r = static_cast<int>(m_cost.cols());
  Eigen::VectorXd out(r);
  double worst = 0.0;
  with_kernel(div, [&](auto kern) {
#pragma omp parallel
    {
      Eigen::VectorXd offsets(k);
      double local_worst = 0.0;
#pragma omp for schedule(static) nowait
      for (int i = 0; i < r; ++i) {
        offsets = z - m_cost.col(i);
        double abs_h = 0.0;
        out[i] = atom_root(kern, offsets.data(), w.data(), k, t0, root_tol,
                           warm ? (*warm)[i] : 0.0, warm != nullptr, abs_h);
        local_worst = std::max(local_worst, abs_h);
      }
#pragma omp critical
      worst = std::max(worst, local_worst);
    }
  });
  max_h = worst;
  return out;
}

double oscillation(const Eigen::VectorXd& v) { return v.maxCoeff() - v.minCoeff(); }

}  // namespace

NoConvergence::NoConvergence(int iterations_, double residual_, std::shared_ptr<Solution> last)
    : std::runtime_error("solver did not reach tolerance (residual " + std::to_string(residual_) +
                         " after " + std::to_string(iterations_) + " iterations)"),
      iterations(iterations_),
      residual(residual_),
      last_iterate(std::move(last)) {}

Eigen::MatrixXd Solution::coupling() const {
  const int n = static_cast<int>(f.size()), m = static_cast<int>(g.size());
  Eigen::MatrixXd pi(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i)
      pi(i, j) = p.weights[i] * q.weights[j] * divergence.psi(xi(i, j) / epsilon, 1);
  return pi;
}

Eigen::VectorXd conjugate_update(const Eigen::VectorXd& g, const Eigen::MatrixXd& cost,
                                 const DiscreteMeasure& q, const Divergence& div, double root_tol,
                                 const Eigen::VectorXd* warm_start, double* max_abs_h) {
  if (!g.allFinite() || !cost.allFinite())
    throw std::invalid_argument("conjugate_update: non-finite input");
  if (g.size() != cost.cols() || q.size() != cost.cols())
    throw std::invalid_argument("conjugate_update: size mismatch");
  Eigen::MatrixXd transposed = cost.transpose();
  double worst = 0.0;
  Eigen::VectorXd f = conjugate_block(transposed, g, q.weights, div, div.t0(), root_tol,
                                      warm_start, worst);
  if (max_abs_h) *max_abs_h = worst;
  return f;
}

double residual_norm(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                     const Eigen::MatrixXd& cost, const Eigen::VectorXd& p,
                     const Eigen::VectorXd& q, const Divergence& div) {
  const int n = static_cast<int>(f.size()), m = static_cast<int>(g.size());
  return with_kernel(div, [&](auto kern) {
    double worst = 0.0;
#pragma omp parallel
    {
      double local = 0.0;
#pragma omp for schedule(static) nowait
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += p[i] * kern.p1(f[i] + g[j] - cost(i, j));
        local = std::max(local, std::abs(s - 1.0));
      }
#pragma omp critical
      worst = std::max(worst, local);
    }
    // Row block: each row is accumulated over j in ascending order by exactly
    // one thread, so the result does not depend on the thread count.
    Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(n);
#pragma omp parallel
    {
#ifdef _OPENMP
      const int nth = omp_get_num_threads();
      const int tid = omp_get_thread_num();
#else
      const int nth = 1, tid = 0;
#endif
      const int i0 = static_cast<int>((static_cast<long>(n) * tid) / nth);
      const int i1 = static_cast<int>((static_cast<long>(n) * (tid + 1)) / nth);
      for (int j = 0; j < m; ++j)
        for (int i = i0; i < i1; ++i) rowsum[i] += q[j] * kern.p1(f[i] + g[j] - cost(i, j));
    }
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(rowsum[i] - 1.0));
    return worst;
  });
}

double dual_objective(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                      const Eigen::MatrixXd& cost, const Eigen::VectorXd& p,
                      const Eigen::VectorXd& q, const Divergence& div, double epsilon) {
  const int n = static_cast<int>(f.size()), m = static_cast<int>(g.size());
  Eigen::VectorXd colsum(m);
  with_kernel(div, [&](auto kern) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
      Kahan acc;
      for (int i = 0; i < n; ++i) acc.add(p[i] * kern.p0((f[i] + g[j] - cost(i, j)) / epsilon));
      colsum[j] = acc.sum;
    }
  });
  Kahan psi_total;
  for (int j = 0; j < m; ++j) psi_total.add(q[j] * colsum[j]);
  Kahan lin;
  for (int i = 0; i < n; ++i) lin.add(p[i] * f[i]);
  for (int j = 0; j < m; ++j) lin.add(q[j] * g[j]);
  return lin.sum - epsilon * psi_total.sum;
}

double primal_objective(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                        const Eigen::MatrixXd& cost, const Eigen::VectorXd& p,
                        const Eigen::VectorXd& q, const Divergence& div, double epsilon) {
  const int n = static_cast<int>(f.size()), m = static_cast<int>(g.size());
  Eigen::VectorXd colsum(m);
  with_kernel(div, [&](auto kern) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
      Kahan acc;
      for (int i = 0; i < n; ++i) {
        const double density = kern.p1((f[i] + g[j] - cost(i, j)) / epsilon);
        acc.add(p[i] * (cost(i, j) * density + epsilon * div.phi(density)));
      }
      colsum[j] = acc.sum;
    }
  });
  Kahan total;
  for (int j = 0; j < m; ++j) total.add(q[j] * colsum[j]);
  return total.sum;
}

Solution solve(const DiscreteMeasure& p, const DiscreteMeasure& q, const CostSpec& cost_spec,
               const Divergence& div, double epsilon, const SolveOptions& opts) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("solve: epsilon must be positive");
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw std::invalid_argument("solve: bad options");
  if ((p.weights.array() <= 0.0).any() || (q.weights.array() <= 0.0).any())
    throw std::invalid_argument("solve: atoms must carry positive mass");

  CostMatrix cost = build_cost_matrix(p, q, cost_spec);
  const int n = p.size(), m = q.size();
  const Eigen::MatrixXd unit_cost = cost.values / epsilon;
  const Eigen::MatrixXd unit_cost_t = unit_cost.transpose();
  const double unit_cost_norm = cost.max_abs / epsilon;
  const double t0 = div.t0();

  Eigen::VectorXd f(n), g = Eigen::VectorXd::Zero(m);
  SolveCertificates certs;
  double prev_dual = -std::numeric_limits<double>::infinity();
  double res = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iter = 0;

  auto half_step_bookkeeping = [&](const Eigen::VectorXd& updated, double max_h) {
    certs.max_root_residual = std::max(certs.max_root_residual, max_h);
    certs.max_oscillation_excess =
        std::max(certs.max_oscillation_excess, oscillation(updated) - 2.0 * unit_cost_norm);
    const double d = dual_objective(f, g, unit_cost, p.weights, q.weights, div, 1.0);
    if (d < prev_dual) certs.max_dual_decrease = std::max(certs.max_dual_decrease, prev_dual - d);
    prev_dual = d;
  };

  while (iter < opts.max_iter) {
    ++iter;
    double max_h = 0.0;
    f = conjugate_block(unit_cost_t, g, q.weights, div, t0, opts.root_tol,
                        iter > 1 ? &f : nullptr, max_h);
    half_step_bookkeeping(f, max_h);
    g = conjugate_block(unit_cost, f, p.weights, div, t0, opts.root_tol,
                        iter > 1 ? &g : nullptr, max_h);
    half_step_bookkeeping(g, max_h);
    res = residual_norm(f, g, unit_cost, p.weights, q.weights, div);
    if (res <= opts.tol) {
      converged = true;
      break;
    }
  }

  // Map back to epsilon scale and fix the gauge sum p_i f_i = sum q_j g_j.
  Eigen::VectorXd f_eps = epsilon * f, g_eps = epsilon * g;
  const double shift = 0.5 * (p.weights.dot(f_eps) - q.weights.dot(g_eps));
  f_eps.array() -= shift;
  g_eps.array() += shift;

  Solution sol{p, q, cost_spec, std::move(cost), div, epsilon,
               std::move(f_eps), std::move(g_eps)};
  sol.residual = res;
  sol.iterations = iter;
  sol.converged = converged;
  sol.primal_value =
      primal_objective(sol.f, sol.g, sol.cost.values, p.weights, q.weights, div, epsilon);
  sol.dual_value =
      dual_objective(sol.f, sol.g, sol.cost.values, p.weights, q.weights, div, epsilon);
  certs.duality_gap = std::abs(sol.primal_value - sol.dual_value);
  const double sup_fg = std::max(std::abs(sol.f.maxCoeff() + sol.g.maxCoeff()),
                                 std::abs(sol.f.minCoeff() + sol.g.minCoeff()));
  certs.sup_norm_excess = sup_fg - (epsilon * t0 + 5.0 * sol.cost.max_abs);
  sol.certificates = certs;

  if (!converged) throw NoConvergence(iter, res, std::make_shared<Solution>(std::move(sol)));
  return sol;
}

Eigen::VectorXd extend_potential(const Solution& sol, Side side, const Eigen::MatrixXd& points) {
  if (!sol.converged) throw std::invalid_argument("extend_potential: solution not converged");
  Eigen::MatrixXd pts = points;
  if (sol.cost_spec.kind == CostKind::TorusSqDist) pts = wrap_to_unit_torus(std::move(pts));
  if (pts.cols() != sol.cost_spec.dim)
    throw std::invalid_argument("extend_potential: dimension mismatch");

  const DiscreteMeasure& opposite = (side == Side::P) ? sol.q : sol.p;
  const Eigen::VectorXd& opp_potential = (side == Side::P) ? sol.g : sol.f;
  const int k = static_cast<int>(pts.rows()), mo = opposite.size();

  // costs from each opposite atom to each new point, column per new point
  Eigen::MatrixXd block(mo, k);
  for (int i = 0; i < k; ++i) {
    const Eigen::VectorXd x = pts.row(i);
    for (int j = 0; j < mo; ++j)
      block(j, i) = cost_eval(sol.cost_spec, x, opposite.points.row(j));
  }
  block /= sol.epsilon;
  const Eigen::VectorXd unit_opp = opp_potential / sol.epsilon;
  double max_h = 0.0;
  Eigen::VectorXd ext = conjugate_block(block, unit_opp, opposite.weights, sol.divergence,
                                        sol.divergence.t0(), 1e-13, nullptr, max_h);
  return sol.epsilon * ext;
}

}  // namespace rotlab
