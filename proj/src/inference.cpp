#include "rotlab/inference.hpp"

#include <cmath>
#include <cstring>

#include "rotlab/rng.hpp"

namespace rotlab {

namespace {

double weighted_variance(const Eigen::VectorXd& values, const Eigen::VectorXd& weights) {
  const double mean = weights.dot(values);
  return weights.dot((values.array() - mean).square().matrix());
}

double clamp_sigma2(double raw) { return raw < 0.0 ? 0.0 : raw; }

uint64_t hash_matrix(const Eigen::MatrixXd& m) {
  uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      uint64_t bits;
      const double v = m(i, j);
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      h = hash_combine(h, bits);
    }
  return h;
}

}  // namespace

CltReport cost_clt_variance(const Solution& sol) {
  const int n = static_cast<int>(sol.f.size()), m = static_cast<int>(sol.g.size());
  const double eps = sol.epsilon;
  Eigen::VectorXd a = sol.f, b = sol.g;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += sol.q.weights[j] * sol.divergence.psi(sol.xi(i, j) / eps, 0);
    a[i] -= eps * acc;
  }
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += sol.p.weights[i] * sol.divergence.psi(sol.xi(i, j) / eps, 0);
    b[j] -= eps * acc;
  }
  CltReport rep;
  rep.kind = CltKind::Cost;
  rep.sigma2 = clamp_sigma2(weighted_variance(a, sol.p.weights) +
                            weighted_variance(b, sol.q.weights));
  rep.epsilon = eps;
  rep.n = n;
  rep.m = m;
  return rep;
}

CltReport coupling_clt_variance(const Solution& sol, const Eigen::MatrixXd& eta) {
  return coupling_clt_variance(sol, build_system(sol), eta);
}

CltReport coupling_clt_variance(const Solution& sol, const LinearizedSystem& sys,
                                const Eigen::MatrixXd& eta) {
  const int n = static_cast<int>(sol.f.size()), m = static_cast<int>(sol.g.size());
  if (eta.rows() != n || eta.cols() != m)
    throw std::invalid_argument("coupling_clt_variance: eta shape mismatch");
  const double eps = sol.epsilon;

  Eigen::MatrixXd h(n, m), k(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) {
      const double t = sol.xi(i, j) / eps;
      h(i, j) = sol.divergence.psi(t, 1);
      k(i, j) = sol.divergence.psi(t, 2);
    }

  // centering constant int eta psi''(xi) d(P x Q) and the centered test function
  const double mbar = sol.p.weights.dot((eta.cwiseProduct(k)) * sol.q.weights);
  const Eigen::MatrixXd eta_bar = eta.array() - mbar;

  // outer-integrand weights against (u (+) v): sum_ij p_i q_j (u_i + v_j) eta_bar_ij k_ij
  const Eigen::MatrixXd ek = eta_bar.cwiseProduct(k);
  Eigen::VectorXd omega(n + m);
  omega.head(n) = sol.p.weights.cwiseProduct(ek * sol.q.weights);
  omega.tail(m) = sol.q.weights.cwiseProduct(ek.transpose() * sol.p.weights);

  // Conditional expectations of the inverse rhs fields. Conditioning on X = a:
  // the Q-block is h(a, .)/D_P while the P-block averages to 1/D_Q by the FOC.
  Eigen::MatrixXd rhs_x = Eigen::MatrixXd::Zero(n + m + 1, n);
  for (int a = 0; a < n; ++a) {
    rhs_x.col(a).head(n) = sys.d_q.cwiseInverse();
    rhs_x.col(a).segment(n, m) = h.row(a).transpose().cwiseQuotient(sys.d_p);
  }
  Eigen::MatrixXd rhs_y = Eigen::MatrixXd::Zero(n + m + 1, m);
  for (int b = 0; b < m; ++b) {
    rhs_y.col(b).head(n) = h.col(b).cwiseQuotient(sys.d_q);
    rhs_y.col(b).segment(n, m) = sys.d_p.cwiseInverse();
  }
  const Eigen::MatrixXd z_x = sys.bordered_lu.solve(rhs_x).topRows(n + m);
  const Eigen::MatrixXd z_y = sys.bordered_lu.solve(rhs_y).topRows(n + m);

  // V_X[a] = -omega . z_a + sum_j q_j eta_bar(a, j) h(a, j); V_Y analogous.
  Eigen::VectorXd v_x = (eta_bar.cwiseProduct(h)) * sol.q.weights - z_x.transpose() * omega;
  Eigen::VectorXd v_y =
      (eta_bar.cwiseProduct(h)).transpose() * sol.p.weights - z_y.transpose() * omega;

  CltReport rep;
  rep.kind = CltKind::Coupling;
  rep.sigma2 = clamp_sigma2(weighted_variance(v_x, sol.p.weights) +
                            weighted_variance(v_y, sol.q.weights));
  rep.epsilon = eps;
  rep.n = n;
  rep.m = m;
  rep.eta_hash = hash_matrix(eta);
  return rep;
}

CltReport potential_clt_covariance(const Solution& sol) {
  return potential_clt_covariance(sol, build_system(sol));
}

CltReport potential_clt_covariance(const Solution& sol, const LinearizedSystem& sys) {
  const int n = static_cast<int>(sol.f.size()), m = static_cast<int>(sol.g.size());
  const double eps = sol.epsilon;

  Eigen::MatrixXd h(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) h(i, j) = sol.divergence.psi(sol.xi(i, j) / eps, 1);

  // Gaussian covariance of the normalized FOC fields; the FOC makes the means
  // sum_j q_j h_aj equal to 1, hence the "- 1".
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n + m, n + m);
  {
    const Eigen::MatrixXd hq_ht = h * sol.q.weights.asDiagonal() * h.transpose();
    const Eigen::MatrixXd hp_h = h.transpose() * sol.p.weights.asDiagonal() * h;
    s.topLeftCorner(n, n) =
        (hq_ht.array() - 1.0).matrix().cwiseQuotient(sys.d_q * sys.d_q.transpose());
    s.bottomRightCorner(m, m) =
        (hp_h.array() - 1.0).matrix().cwiseQuotient(sys.d_p * sys.d_p.transpose());
  }

  const Eigen::MatrixXd inv = sys.inverse_matrix();
  Eigen::MatrixXd cov = (eps * eps) * inv * s * inv.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();

  CltReport rep;
  rep.kind = CltKind::Potential;
  rep.covariance = std::move(cov);
  rep.epsilon = eps;
  rep.n = n;
  rep.m = m;
  return rep;
}

}  // namespace rotlab
