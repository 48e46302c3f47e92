#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <stdexcept>

#include "rotlab/solver.hpp"

namespace rotlab {

// Discretization of the derivative L = Id + A of the normalized first-order
// condition at a solution. Blocks:
//   A1[i][j] = q_j psi''(xi_ij/eps) / D_Q[i],  D_Q[i] = sum_j q_j psi''(xi_ij/eps)
//   A2[j][i] = p_i psi''(xi_ij/eps) / D_P[j],  D_P[j] = sum_i p_i psi''(xi_ij/eps)
// L acts on stacked vectors (u, v) of length n + m and kills (1_n, -1_m);
// the gauge vector (p, -q) selects the representative slice.
struct LinearizedSystem {
  Eigen::MatrixXd a1;     // n x m
  Eigen::MatrixXd a2;     // m x n
  Eigen::VectorXd d_q;    // length n
  Eigen::VectorXd d_p;    // length m
  Eigen::VectorXd gauge;  // length n + m: (p, -q)
  double delta_min = 0.0;
  double condition_estimate = 0.0;  // 1 / rcond of the bordered matrix

  int n() const { return static_cast<int>(a1.rows()); }
  int m() const { return static_cast<int>(a2.rows()); }

  Eigen::VectorXd apply_l(const Eigen::VectorXd& z) const;
  Eigen::VectorXd apply_a(const Eigen::VectorXd& z) const;

  // Solves the bordered system [[L, gauge], [gauge^T, 0]] [z; lam] = [r; 0]:
  // returns z with L z = r - lam * gauge and gauge . z = 0. The optional
  // output reports ||L z - r||_inf (zero when r lies in range(L)).
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& r,
                                double* projection_residual = nullptr) const;

  // The (n+m) x (n+m) linear map r -> apply_inverse(r) as an explicit matrix.
  Eigen::MatrixXd inverse_matrix() const;

  Eigen::PartialPivLU<Eigen::MatrixXd> bordered_lu;  // cached factorization
};

class DegenerateDenominator : public std::runtime_error {
 public:
  explicit DegenerateDenominator(double value)
      : std::runtime_error("psi'' denominator vanished (min " + std::to_string(value) + ")") {}
};

class SingularSystem : public std::runtime_error {
 public:
  explicit SingularSystem(double cond)
      : std::runtime_error("bordered linear system numerically singular (cond ~ " +
                           std::to_string(cond) + ")") {}
};

LinearizedSystem build_system(const Solution& sol);

struct SupportDiagnostics {
  double delta_min = 0.0;
  double support_fraction = 0.0;     // share of (i,j) with pi_ij > 0
  double positivity_fraction = 0.0;  // share of (i,j) with psi''(xi_ij/eps) > 0
};

SupportDiagnostics diagnostics(const Solution& sol);

}  // namespace rotlab
