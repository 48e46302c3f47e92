#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "rotlab/linearization.hpp"
#include "rotlab/solver.hpp"

namespace rotlab {

enum class CltKind { Cost, Coupling, Potential };

// Plug-in limit variance/covariance of the sqrt(n)-rescaled empirical errors,
// evaluated on a discrete solution treated as the population.
struct CltReport {
  CltKind kind = CltKind::Cost;
  double sigma2 = 0.0;          // Cost / Coupling
  Eigen::MatrixXd covariance;   // Potential: (n+m) x (n+m) on the gauge slice
  double epsilon = 1.0;
  int n = 0;
  int m = 0;
  uint64_t eta_hash = 0;  // Coupling only: hash of the test function
};

// Limit variance of sqrt(n) (ROT_eps(P_n, Q_n) - ROT_eps(P, Q)):
// sigma^2 = Var_p(a) + Var_q(b) with
//   a_i = f_i - eps sum_j q_j psi(xi_ij/eps),  b_j = g_j - eps sum_i p_i psi(xi_ij/eps).
CltReport cost_clt_variance(const Solution& sol);

// Limit variance of sqrt(n) int eta d(pi_n - pi) for a bounded test function
// eta given entrywise on the support product. Assembles the conditional
// expectations through the inverse of the linearized system.
CltReport coupling_clt_variance(const Solution& sol, const Eigen::MatrixXd& eta);
CltReport coupling_clt_variance(const Solution& sol, const LinearizedSystem& sys,
                                const Eigen::MatrixXd& eta);

// Limit covariance of sqrt(n) (f_n - f, g_n - g) on the gauge slice:
// eps^2 Linv S Linv^T with S = blockdiag(S_f, S_g),
//   S_f[a][a'] = (sum_j q_j h_aj h_a'j - 1) / (D_Q[a] D_Q[a']),  h = psi'(xi/eps).
CltReport potential_clt_covariance(const Solution& sol);
CltReport potential_clt_covariance(const Solution& sol, const LinearizedSystem& sys);

}  // namespace rotlab
