#include "rotlab/linearization.hpp"

#include <cmath>
#include <limits>

namespace rotlab {

Eigen::VectorXd LinearizedSystem::apply_a(const Eigen::VectorXd& z) const {
  const int nn = n(), mm = m();
  if (z.size() != nn + mm) throw std::invalid_argument("apply_a: size mismatch");
  Eigen::VectorXd out(nn + mm);
  out.head(nn) = a1 * z.tail(mm);
  out.tail(mm) = a2 * z.head(nn);
  return out;
}

Eigen::VectorXd LinearizedSystem::apply_l(const Eigen::VectorXd& z) const {
  return z + apply_a(z);
}

Eigen::VectorXd LinearizedSystem::apply_inverse(const Eigen::VectorXd& r,
                                                double* projection_residual) const {
  const int nm = n() + m();
  if (r.size() != nm) throw std::invalid_argument("apply_inverse: size mismatch");
  if (!r.allFinite()) throw std::invalid_argument("apply_inverse: non-finite right-hand side");
  Eigen::VectorXd rhs(nm + 1);
  rhs.head(nm) = r;
  rhs[nm] = 0.0;
  Eigen::VectorXd zl = bordered_lu.solve(rhs);
  Eigen::VectorXd z = zl.head(nm);
  if (projection_residual) *projection_residual = (apply_l(z) - r).cwiseAbs().maxCoeff();
  return z;
}

Eigen::MatrixXd LinearizedSystem::inverse_matrix() const {
  const int nm = n() + m();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Identity(nm + 1, nm + 1);
  Eigen::MatrixXd full = bordered_lu.solve(rhs);
  return full.topLeftCorner(nm, nm);
}

LinearizedSystem build_system(const Solution& sol) {
  if (!sol.converged) throw std::invalid_argument("build_system: solution not converged");
  const int n = static_cast<int>(sol.f.size()), m = static_cast<int>(sol.g.size());
  const double eps = sol.epsilon;

  Eigen::MatrixXd psi2(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) psi2(i, j) = sol.divergence.psi(sol.xi(i, j) / eps, 2);

  LinearizedSystem sys;
  sys.d_q = psi2 * sol.q.weights;             // D_Q[i] = sum_j q_j psi''
  sys.d_p = psi2.transpose() * sol.p.weights; // D_P[j] = sum_i p_i psi''
  sys.delta_min = std::min(sys.d_q.minCoeff(), sys.d_p.minCoeff());
  if (!(sys.delta_min > 1e-12)) throw DegenerateDenominator(sys.delta_min);

  sys.a1 = sys.d_q.cwiseInverse().asDiagonal() * psi2 * sol.q.weights.asDiagonal();
  sys.a2 = sys.d_p.cwiseInverse().asDiagonal() * psi2.transpose() * sol.p.weights.asDiagonal();

  sys.gauge.resize(n + m);
  sys.gauge.head(n) = sol.p.weights;
  sys.gauge.tail(m) = -sol.q.weights;

  Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(n + m + 1, n + m + 1);
  bordered.topLeftCorner(n, n).setIdentity();
  bordered.block(n, n, m, m).setIdentity();
  bordered.block(0, n, n, m) = sys.a1;
  bordered.block(n, 0, m, n) = sys.a2;
  bordered.block(0, n + m, n + m, 1) = sys.gauge;
  bordered.block(n + m, 0, 1, n + m) = sys.gauge.transpose();

  sys.bordered_lu.compute(bordered);
  const double rcond = sys.bordered_lu.rcond();
  sys.condition_estimate = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(sys.condition_estimate < 1e14)) throw SingularSystem(sys.condition_estimate);
  return sys;
}

SupportDiagnostics diagnostics(const Solution& sol) {
  const int n = static_cast<int>(sol.f.size()), m = static_cast<int>(sol.g.size());
  SupportDiagnostics out;
  double dq_min = std::numeric_limits<double>::infinity();
  double dp_min = std::numeric_limits<double>::infinity();
  Eigen::VectorXd d_p = Eigen::VectorXd::Zero(m);
  long support = 0, positive = 0;
  for (int i = 0; i < n; ++i) {
    double dq = 0.0;
    for (int j = 0; j < m; ++j) {
      const double t = sol.xi(i, j) / sol.epsilon;
      if (sol.divergence.psi(t, 1) > 0.0) ++support;
      const double k = sol.divergence.psi(t, 2);
      if (k > 0.0) ++positive;
      dq += sol.q.weights[j] * k;
      d_p[j] += sol.p.weights[i] * k;
    }
    dq_min = std::min(dq_min, dq);
  }
  dp_min = d_p.minCoeff();
  out.delta_min = std::min(dq_min, dp_min);
  out.support_fraction = static_cast<double>(support) / (static_cast<double>(n) * m);
  out.positivity_fraction = static_cast<double>(positive) / (static_cast<double>(n) * m);
  return out;
}

}  // namespace rotlab
