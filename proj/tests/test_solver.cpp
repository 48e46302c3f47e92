#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rotlab/geometry.hpp"
#include "rotlab/rng.hpp"
#include "rotlab/solver.hpp"

using namespace rotlab;

namespace {

DiscreteMeasure two_atoms_01() {
  Eigen::MatrixXd pts(2, 1);
  pts << 0.0, 1.0;
  return DiscreteMeasure::uniform(pts);
}

// independent scalar oracle for the symmetric 2x2 KL fixed point:
// e^{2s-1} (1 + e^{-1}) = 2  =>  s = (1 + log 2 - log(1 + e^{-1})) / 2
const double kFixedPointS = 0.5 * (1.0 + std::log(2.0) - std::log(1.0 + std::exp(-1.0)));

DiscreteMeasure random_measure(int n, int d, uint64_t seed) {
  CounterRng rng(seed);
  Eigen::MatrixXd pts(n, d);
  Eigen::VectorXd w(n);
  uint64_t ctr = 0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) pts(i, k) = rng.uniform(ctr++);
    w[i] = 0.2 + rng.uniform(ctr++);
  }
  w /= w.sum();
  return DiscreteMeasure::make(pts, w);
}

// Test-only reference: classic entropic Sinkhorn scaling pi = u_i K_ij v_j
// with K_ij = p_i q_j exp(-c_ij / eps). Fully independent of the solver's
// root-finding path.
Eigen::MatrixXd textbook_entropic_sinkhorn(const Eigen::MatrixXd& cost, const Eigen::VectorXd& p,
                                           const Eigen::VectorXd& q, double eps) {
  const Eigen::MatrixXd kernel =
      (-cost / eps).array().exp().matrix().cwiseProduct(p * q.transpose());
  Eigen::VectorXd u = Eigen::VectorXd::Ones(p.size());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(q.size());
  for (int it = 0; it < 100000; ++it) {
    u = p.cwiseQuotient(kernel * v);
    v = q.cwiseQuotient(kernel.transpose() * u);
    const Eigen::MatrixXd pi = u.asDiagonal() * kernel * v.asDiagonal();
    const double err = std::max((pi.rowwise().sum() - p).cwiseAbs().maxCoeff(),
                                (pi.colwise().sum().transpose() - q).cwiseAbs().maxCoeff());
    if (err < 1e-15) break;
  }
  return u.asDiagonal() * kernel * v.asDiagonal();
}

}  // namespace

TEST_CASE("conjugate_update: single opposite atom pins f_i = t0 + c_i") {
  for (auto div : {Divergence::kl(), Divergence::tsallis(1.5), Divergence::quadratic()}) {
    Eigen::MatrixXd cost(3, 1);
    cost << 0.3, 1.7, 0.0;
    Eigen::MatrixXd qpt(1, 1);
    qpt << 0.0;
    auto q = DiscreteMeasure::uniform(qpt);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd f = conjugate_update(g, cost, q, div);
    for (int i = 0; i < 3; ++i)
      CHECK(f[i] == doctest::Approx(div.t0() + cost(i, 0)).epsilon(1e-12));
  }
}

TEST_CASE("conjugate_update: symmetric 2x2 KL fixed point") {
  auto u = two_atoms_01();
  Eigen::MatrixXd cost(2, 2);
  cost << 0, 1, 1, 0;
  Eigen::VectorXd g = Eigen::VectorXd::Constant(2, kFixedPointS);
  Eigen::VectorXd f = conjugate_update(g, cost, u, Divergence::kl());
  CHECK(f[0] == doctest::Approx(kFixedPointS).epsilon(1e-12));
  CHECK(f[1] == doctest::Approx(kFixedPointS).epsilon(1e-12));
  // the update output satisfies its own FOC block to root tolerance
  double h = 0.0;
  conjugate_update(g, cost, u, Divergence::kl(), 1e-13, nullptr, &h);
  CHECK(h <= 1e-13);
}

TEST_CASE("conjugate_update: raising any g_j weakly lowers every f_i") {
  auto p = random_measure(4, 2, 5);
  auto q = random_measure(3, 2, 6);
  auto cost = build_cost_matrix(p, q, CostSpec{CostKind::SqEuclidean, 2});
  for (auto div : {Divergence::kl(), Divergence::tsallis(1.5)}) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd f0 = conjugate_update(g, cost.values, q, div);
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd g2 = g;
      g2[j] += 0.25;
      Eigen::VectorXd f2 = conjugate_update(g2, cost.values, q, div);
      for (int i = 0; i < 4; ++i) CHECK(f2[i] <= f0[i] + 1e-12);
    }
  }
}

TEST_CASE("conjugate_update: oscillation bounded by 2||c||") {
  auto p = random_measure(6, 2, 15);
  auto q = random_measure(5, 2, 16);
  auto cost = build_cost_matrix(p, q, CostSpec{CostKind::SqEuclidean, 2});
  Eigen::VectorXd g = Eigen::VectorXd::Zero(5);
  for (auto div : {Divergence::kl(), Divergence::tsallis(1.5), Divergence::quadratic()}) {
    Eigen::VectorXd f = conjugate_update(g, cost.values, q, div);
    CHECK(f.maxCoeff() - f.minCoeff() <= 2.0 * cost.max_abs + 1e-12);
  }
}

TEST_CASE("solve: one-atom marginals give ROT = c and f+g = c + eps t0") {
  Eigen::MatrixXd px(1, 2), qx(1, 2);
  px << 0.2, 0.4;
  qx << 0.9, 0.1;
  auto p = DiscreteMeasure::uniform(px);
  auto q = DiscreteMeasure::uniform(qx);
  const double c = (px.row(0) - qx.row(0)).squaredNorm();
  for (auto div : {Divergence::kl(), Divergence::tsallis(1.5), Divergence::quadratic()}) {
    for (double eps : {0.5, 1.0, 2.0}) {
      auto sol = solve(p, q, CostSpec{CostKind::SqEuclidean, 2}, div, eps);
      CHECK(sol.primal_value == doctest::Approx(c).epsilon(1e-10));
      CHECK(sol.dual_value == doctest::Approx(c).epsilon(1e-10));
      CHECK(sol.coupling()(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(sol.f[0] + sol.g[0] == doctest::Approx(c + eps * div.t0()).epsilon(1e-10));
    }
  }
}

TEST_CASE("solve: 2x2 KL coupling matches the closed-form fixed point") {
  auto u = two_atoms_01();
  auto sol = solve(u, u, CostSpec{CostKind::SqEuclidean, 1}, Divergence::kl(), 1.0);
  const double pi_diag = std::exp(2.0 * kFixedPointS - 1.0) / 4.0;  // = 0.3655293...
  auto pi = sol.coupling();
  CHECK(pi(0, 0) == doctest::Approx(pi_diag).epsilon(1e-9));
  CHECK(pi(1, 1) == doctest::Approx(pi_diag).epsilon(1e-9));
  CHECK(pi(0, 1) == doctest::Approx(0.5 - pi_diag).epsilon(1e-9));  // row sum p_1 = 1/2
  CHECK(sol.f[0] == doctest::Approx(kFixedPointS).epsilon(1e-9));
  CHECK(sol.g[1] == doctest::Approx(kFixedPointS).epsilon(1e-9));
}

TEST_CASE("solve: sparse 2x2 Tsallis instance is exact") {
  auto u = two_atoms_01();
  Eigen::MatrixXd pts(2, 1);
  pts << 0.0, std::sqrt(10.0);  // cost gap 10 off-diagonal
  auto far = DiscreteMeasure::uniform(pts);
  // same-support construction with cost [[0,10],[10,0]] via explicit points
  Eigen::MatrixXd px(2, 1), qx(2, 1);
  px << 0.0, std::sqrt(10.0);
  qx << 0.0, std::sqrt(10.0);
  auto p = DiscreteMeasure::uniform(px);
  auto q = DiscreteMeasure::uniform(qx);
  auto sol = solve(p, q, CostSpec{CostKind::SqEuclidean, 1}, Divergence::tsallis(1.5), 1.0);
  auto pi = sol.coupling();
  CHECK(pi(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(pi(0, 1) == 0.0);  // exact zero from the psi' truncation
  CHECK(pi(1, 0) == 0.0);
  CHECK(pi(1, 1) == doctest::Approx(0.5).epsilon(1e-10));
  const double root2 = std::sqrt(2.0);
  for (int i = 0; i < 2; ++i) {
    CHECK(sol.f[i] == doctest::Approx(root2 / 2.0).epsilon(1e-10));
    CHECK(sol.g[i] == doctest::Approx(root2 / 2.0).epsilon(1e-10));
  }
  const double value = 2.0 / 3.0 * (root2 - 1.0);  // = 0.2761423...
  CHECK(sol.primal_value == doctest::Approx(value).epsilon(1e-9));
  // hand dual evaluation: sqrt2 - (psi(sqrt2) + psi(sqrt2 - 10)) / 2
  const double psi_pos = root2 * root2 * root2 / 3.0 + 2.0 / 3.0;  // 1.609476
  const double dual_hand = root2 - 0.5 * (psi_pos + 2.0 / 3.0);
  CHECK(sol.dual_value == doctest::Approx(dual_hand).epsilon(1e-9));
  CHECK(std::abs(sol.primal_value - sol.dual_value) <= 1e-8);
  (void)far;
}

TEST_CASE("residual_norm examples") {
  auto u = two_atoms_01();
  Eigen::MatrixXd cost(2, 2);
  cost << 0, 1, 1, 0;
  Eigen::VectorXd s2 = Eigen::VectorXd::Constant(2, kFixedPointS);
  CHECK(residual_norm(s2, s2, cost, u.weights, u.weights, Divergence::kl()) <= 1e-12);

  // after a conjugate update the updated block is exact
  Eigen::VectorXd g(2);
  g << 0.1, -0.4;
  Eigen::VectorXd f = conjugate_update(g, cost, u, Divergence::kl());
  Eigen::VectorXd rowres(2);
  for (int i = 0; i < 2; ++i) {
    double s = 0.0;
    for (int j = 0; j < 2; ++j)
      s += u.weights[j] * Divergence::kl().psi(f[i] + g[j] - cost(i, j), 1);
    rowres[i] = std::abs(s - 1.0);
  }
  CHECK(rowres.maxCoeff() <= 1e-12);

  // zero potentials with large costs truncate every psi' term for Tsallis
  Eigen::MatrixXd big = Eigen::MatrixXd::Constant(2, 2, 10.0);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK(residual_norm(zero, zero, big, u.weights, u.weights, Divergence::tsallis(1.5)) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("solve certificates on random instances") {
  for (auto div : {Divergence::kl(), Divergence::tsallis(1.5), Divergence::quadratic()}) {
    for (double eps : {0.5, 1.0}) {
      auto p = random_measure(12, 2, 100 + static_cast<int>(eps * 10));
      auto q = random_measure(9, 2, 200 + static_cast<int>(eps * 10));
      SolveOptions opts;
      auto sol = solve(p, q, CostSpec{CostKind::SqEuclidean, 2}, div, eps, opts);
      CHECK(sol.converged);
      CHECK(sol.certificates.duality_gap <= 1e-8);
      CHECK(sol.certificates.max_dual_decrease <= 1e-12);
      CHECK(sol.certificates.max_oscillation_excess <= 1e-12);
      CHECK(sol.certificates.sup_norm_excess <= 0.0);
      CHECK(sol.certificates.max_root_residual <= 1e-13);

      auto pi = sol.coupling();
      CHECK((pi.array() >= 0.0).all());
      CHECK((pi.rowwise().sum() - p.weights).cwiseAbs().maxCoeff() <= 10.0 * opts.tol);
      CHECK((pi.colwise().sum().transpose() - q.weights).cwiseAbs().maxCoeff() <= 10.0 * opts.tol);
      if (div.family() == DivergenceFamily::KL) CHECK((pi.array() > 0.0).all());
    }
  }
}

TEST_CASE("scaling identity: (c, eps) equals eps-scaled unit problem") {
  // c/eps for squared euclidean equals the cost of points scaled by 1/sqrt(eps)
  for (double eps : {0.1, 0.5, 2.0}) {
    auto p = random_measure(8, 2, 31);
    auto q = random_measure(7, 2, 32);
    SolveOptions tight;
    tight.tol = 1e-12;
    auto sol_eps = solve(p, q, CostSpec{CostKind::SqEuclidean, 2}, Divergence::tsallis(1.5), eps,
                         tight);
    DiscreteMeasure ps{p.points / std::sqrt(eps), p.weights};
    DiscreteMeasure qs{q.points / std::sqrt(eps), q.weights};
    auto sol_unit = solve(ps, qs, CostSpec{CostKind::SqEuclidean, 2}, Divergence::tsallis(1.5),
                          1.0, tight);
    CHECK(sol_eps.primal_value ==
          doctest::Approx(eps * sol_unit.primal_value).epsilon(1e-10));
    CHECK((sol_eps.coupling() - sol_unit.coupling()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((sol_eps.f - eps * sol_unit.f).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, eps));
  }
}

TEST_CASE("KL coupling matches the textbook entropic sinkhorn oracle") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    auto p = random_measure(20, 2, 1000 + seed);
    auto q = random_measure(20, 2, 2000 + seed);
    auto cost = build_cost_matrix(p, q, CostSpec{CostKind::SqEuclidean, 2});
    SolveOptions tight;
    tight.tol = 1e-12;
    auto sol = solve(p, q, CostSpec{CostKind::SqEuclidean, 2}, Divergence::kl(), 1.0, tight);
    auto reference = textbook_entropic_sinkhorn(cost.values, p.weights, q.weights, 1.0);
    CHECK((sol.coupling() - reference).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("gauge convention holds") {
  auto p = random_measure(5, 1, 71);
  auto q = random_measure(6, 1, 72);
  auto sol = solve(p, q, CostSpec{CostKind::SqEuclidean, 1}, Divergence::quadratic(), 0.7);
  CHECK(std::abs(p.weights.dot(sol.f) - q.weights.dot(sol.g)) <= 1e-12);
}

TEST_CASE("NoConvergence carries the last iterate") {
  auto p = random_measure(6, 2, 81);
  auto q = random_measure(6, 2, 82);
  SolveOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-15;
  try {
    solve(p, q, CostSpec{CostKind::SqEuclidean, 2}, Divergence::kl(), 0.25, opts);
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    CHECK(e.iterations == 1);
    CHECK(e.residual > 1e-15);
    REQUIRE(e.last_iterate != nullptr);
    CHECK_FALSE(e.last_iterate->converged);
    CHECK(e.last_iterate->f.allFinite());
  }
}

TEST_CASE("invalid inputs") {
  auto p = random_measure(2, 1, 91);
  CHECK_THROWS_AS(solve(p, p, CostSpec{CostKind::SqEuclidean, 1}, Divergence::kl(), 0.0),
                  std::invalid_argument);
  SolveOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(solve(p, p, CostSpec{CostKind::SqEuclidean, 1}, Divergence::kl(), 1.0, bad),
                  std::invalid_argument);
}

TEST_CASE("extend_potential: stored values and gauge equivariance") {
  auto p = random_measure(5, 2, 55);
  auto q = random_measure(4, 2, 56);
  SolveOptions tight;
  tight.tol = 1e-12;
  auto sol = solve(p, q, CostSpec{CostKind::SqEuclidean, 2}, Divergence::kl(), 1.0, tight);

  Eigen::VectorXd at_atoms = extend_potential(sol, Side::P, p.points);
  CHECK((at_atoms - sol.f).cwiseAbs().maxCoeff() <= 1e-10);
  Eigen::VectorXd q_side = extend_potential(sol, Side::Q, q.points);
  CHECK((q_side - sol.g).cwiseAbs().maxCoeff() <= 1e-10);

  // shifting (f, g) -> (f - delta, g + delta) shifts P-side extensions by -delta
  const double delta = 0.37;
  Solution shifted = sol;
  shifted.f.array() -= delta;
  shifted.g.array() += delta;
  Eigen::MatrixXd probe(2, 2);
  probe << 0.15, 0.85, 0.5, 0.25;
  Eigen::VectorXd base = extend_potential(sol, Side::P, probe);
  Eigen::VectorXd after = extend_potential(shifted, Side::P, probe);
  CHECK((after - (base.array() - delta).matrix()).cwiseAbs().maxCoeff() <= 1e-10);

  Eigen::MatrixXd wrong_dim(1, 3);
  wrong_dim << 0.1, 0.2, 0.3;
  CHECK_THROWS_AS(extend_potential(sol, Side::P, wrong_dim), std::invalid_argument);
}
