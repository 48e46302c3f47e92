#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rotlab {

enum class DivergenceFamily { KL, Tsallis, Quadratic };

// Regularizing divergence phi together with its convex conjugate psi.
// phi(x) penalizes the coupling density x = dpi/d(P x Q); the dual problem
// and the coupling formula only ever touch psi and its derivatives, so both
// sides are kept in closed form per family:
//
//   KL          phi(x) = x log x            psi(y) = e^{y-1}
//   Tsallis(a)  phi(x) = (x^a - 1)/a        psi(y) = y_+^b / b + 1/a,  1/a + 1/b = 1
//   Quadratic   phi(x) = (x^2 - 1)/2        psi(y) = y_+^2 / 2 + 1/2
//
// Tsallis requires alpha in (1,2) so that psi is C^2. The quadratic case is
// the alpha = 2 boundary (psi'' jumps at 0); it is accepted but flagged so
// callers relying on C^2 smoothness can warn.
class Divergence {
 public:
  static Divergence kl() { return Divergence(DivergenceFamily::KL, 0.0); }
  static Divergence tsallis(double alpha);
  static Divergence quadratic() { return Divergence(DivergenceFamily::Quadratic, 2.0); }

  // Parses the CLI/config encoding: "kl", "tsallis:1.5", "quad".
  static Divergence parse(std::string_view text);
  std::string encode() const;

  // psi and derivatives; order 0 -> psi, 1 -> psi', 2 -> psi''.
  // Total on finite inputs; the y_+ truncation at 0 is exact.
  double psi(double t, int order = 0) const;

  // phi(t) for t >= 0. phi(0) = 0 for KL (x log x limit).
  double phi(double t) const;

  DivergenceFamily family() const { return family_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  // Calibration point with psi'(t0) = 1; equals 1 for all three families.
  double t0() const { return 1.0; }
  // True for the quadratic boundary case whose conjugate is not C^2.
  bool outside_c2_class() const { return family_ == DivergenceFamily::Quadratic; }

 private:
  Divergence(DivergenceFamily family, double alpha);

  DivergenceFamily family_;
  double alpha_;  // Tsallis exponent; 2 for quadratic, unused for KL
  double beta_;   // conjugate exponent, 1/alpha + 1/beta = 1
};

}  // namespace rotlab
