#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "rotlab/divergence.hpp"

namespace rotlab {

// Quadrature backend for integrals of t -> w(d^2([0], [y])) over the flat
// torus. Tensor midpoint grids for d <= 3 (with Richardson-style refinement
// to estimate the error); fixed-seed Monte Carlo replicates above that, with
// the spread of replicate means as the self-reported standard error.
struct TorusQuadrature {
  enum class Kind { TensorGrid, MonteCarlo };
  Kind kind = Kind::TensorGrid;
  int resolution = 0;     // tensor: points per dimension (even)
  long nodes = 1 << 18;   // mc: nodes per replicate
  int replicates = 16;    // mc: independent replicates
  uint64_t seed = 0x5eed;

  static TorusQuadrature auto_for(int d);
  std::string describe() const;
};

class QuadratureTooCoarse : public std::runtime_error {
 public:
  QuadratureTooCoarse(double estimate, double target);
};

// Population solution of uniform self-transport on T^d: the potentials are
// the constant C solving 1 = integral psi'((2C - d^2([0],[y]))/eps) dmu(y),
// and rot_value = 2C - eps * integral psi((2C - d^2)/eps) dmu.
struct TorusPopulation {
  int d = 1;
  double epsilon = 1.0;
  Divergence divergence = Divergence::kl();
  double constant = 0.0;   // C_{eps, d, psi}
  double rot_value = 0.0;
  TorusQuadrature quadrature;
  double quadrature_error_estimate = 0.0;
};

// Root of the defining equation, solved to 1e-12 in the quadrature functional
// value. Tensor grids raise QuadratureTooCoarse when the Richardson estimate
// exceeds 1e-11; Monte Carlo reports its standard error instead of failing.
double population_constant(int d, double epsilon, const Divergence& div,
                           const TorusQuadrature& quad, double* error_estimate = nullptr);

// Builds the full population (constant + value + error report) and
// cross-checks the dual value against the primal form through the density.
TorusPopulation make_torus_population(int d, double epsilon, const Divergence& div,
                                      const TorusQuadrature& quad);
TorusPopulation make_torus_population(int d, double epsilon, const Divergence& div);

inline double population_value(const TorusPopulation& pop) { return pop.rot_value; }

}  // namespace rotlab
