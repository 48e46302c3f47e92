#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <stdexcept>

#include "rotlab/divergence.hpp"
#include "rotlab/geometry.hpp"

namespace rotlab {

struct SolveOptions {
  double tol = 1e-10;       // stopping threshold on the unit-scale FOC residual
  int max_iter = 10000;
  double root_tol = 1e-13;  // |h| target per scalar conjugate root
};

// Runtime optimality certificates collected during a solve. All "excess"
// quantities are (observed - bound); nonpositive means the bound held.
struct SolveCertificates {
  double duality_gap = 0.0;            // |primal - dual| at epsilon scale
  double max_dual_decrease = 0.0;      // largest drop of the dual across half-steps
  double max_oscillation_excess = 0.0; // osc(update) - 2||c||_inf, unit scale
  double sup_norm_excess = 0.0;        // ||f(+)g||_inf - (eps t0 + 5||c||_inf)
  double max_root_residual = 0.0;      // worst |h| over accepted conjugate roots
};

// Converged state of the regularized transport problem for (P, Q, c, eps).
// Potentials are stored at epsilon scale under the symmetric gauge
// sum_i p_i f_i = sum_j q_j g_j; xi(i,j) = f_i + g_j - c_ij and the coupling
// density is psi'(xi/eps).
struct Solution {
  DiscreteMeasure p;
  DiscreteMeasure q;
  CostSpec cost_spec;
  CostMatrix cost;
  Divergence divergence;
  double epsilon = 1.0;

  Eigen::VectorXd f;  // length n
  Eigen::VectorXd g;  // length m
  double primal_value = 0.0;
  double dual_value = 0.0;
  double residual = 0.0;  // unit-scale FOC residual, both blocks
  int iterations = 0;
  bool converged = false;
  SolveCertificates certificates;

  double xi(int i, int j) const { return f[i] + g[j] - cost.values(i, j); }
  // pi_ij = p_i q_j psi'(xi_ij / eps); materialized on demand.
  Eigen::MatrixXd coupling() const;
};

class NoConvergence : public std::runtime_error {
 public:
  NoConvergence(int iterations, double residual, std::shared_ptr<Solution> last);
  int iterations;
  double residual;
  std::shared_ptr<Solution> last_iterate;
};

// One exact half-step of the dual block ascent at unit scale: returns f with
// sum_j q_j psi'(f_i + g_j - c(i,j)) = 1 for every i. `cost` is the n x m
// unit-scale cost (caller pre-divides by epsilon).
Eigen::VectorXd conjugate_update(const Eigen::VectorXd& g, const Eigen::MatrixXd& cost,
                                 const DiscreteMeasure& q, const Divergence& div,
                                 double root_tol = 1e-13,
                                 const Eigen::VectorXd* warm_start = nullptr,
                                 double* max_abs_h = nullptr);

// Max FOC violation over both blocks at unit scale.
double residual_norm(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                     const Eigen::MatrixXd& cost, const Eigen::VectorXd& p,
                     const Eigen::VectorXd& q, const Divergence& div);

// Dual objective at epsilon scale:
//   sum_ij p_i q_j [ f_i + g_j - eps psi((f_i + g_j - c_ij)/eps) ].
double dual_objective(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                      const Eigen::MatrixXd& cost, const Eigen::VectorXd& p,
                      const Eigen::VectorXd& q, const Divergence& div, double epsilon);

// Primal objective at epsilon scale through the coupling density psi'(xi/eps):
//   sum_ij p_i q_j [ c_ij psi'(xi/eps) + eps phi(psi'(xi/eps)) ].
double primal_objective(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                        const Eigen::MatrixXd& cost, const Eigen::VectorXd& p,
                        const Eigen::VectorXd& q, const Divergence& div, double epsilon);

// Full solve by exact alternating conjugation (reduced internally to eps = 1
// with cost c/eps, mapped back as f_eps = eps * f_unit). Throws NoConvergence
// carrying the last iterate if `tol` is not reached within max_iter.
Solution solve(const DiscreteMeasure& p, const DiscreteMeasure& q, const CostSpec& cost_spec,
               const Divergence& div, double epsilon, const SolveOptions& opts = {});

enum class Side { P, Q };

// Evaluates the canonical conjugate extension of a converged solution at new
// points: for Side::P each value s solves sum_j q_j psi'((s + g_j - c(x, y_j))/eps) = 1.
Eigen::VectorXd extend_potential(const Solution& sol, Side side,
                                 const Eigen::MatrixXd& new_points);

}  // namespace rotlab
