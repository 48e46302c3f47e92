#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "rotlab/io.hpp"
#include "rotlab/rng.hpp"

using namespace rotlab;

namespace {

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

}  // namespace

TEST_CASE("measure csv round trip, with and without weights") {
  auto m = random_measure(7, 3, 5);
  write_measure_csv("io_measure.csv", m);
  auto back = read_measure_csv("io_measure.csv");
  CHECK(back.points == m.points);  // %.17g round-trips doubles exactly
  CHECK((back.weights - m.weights).cwiseAbs().maxCoeff() <= 1e-16);

  std::ofstream plain("io_plain.csv");
  plain << "x0,x1\n0.25,0.5\n0.75,0.125\n";
  plain.close();
  auto uniform = read_measure_csv("io_plain.csv");
  CHECK(uniform.size() == 2);
  CHECK(uniform.dim() == 2);
  CHECK(uniform.weights[0] == doctest::Approx(0.5).epsilon(1e-16));
}

TEST_CASE("measure csv rejects malformed input") {
  std::ofstream bad("io_bad.csv");
  bad << "x0,weight\n0.5,0.5\nnot_a_number,0.5\n";
  bad.close();
  CHECK_THROWS_AS(read_measure_csv("io_bad.csv"), std::invalid_argument);

  std::ofstream short_row("io_short.csv");
  short_row << "x0,x1\n0.5\n";
  short_row.close();
  CHECK_THROWS_AS(read_measure_csv("io_short.csv"), std::invalid_argument);

  CHECK_THROWS_AS(read_measure_csv("io_missing.csv"), std::invalid_argument);
}

TEST_CASE("solution json round trip preserves estimator inputs") {
  auto p = random_measure(4, 2, 9);
  auto q = random_measure(3, 2, 10);
  auto sol = solve(p, q, CostSpec{CostKind::SqEuclidean, 2}, Divergence::tsallis(1.5), 0.7);
  const auto j = solution_to_json(sol, true);
  CHECK(j.at("format_version") == 1);
  CHECK(j.at("coupling").size() == 4);

  const std::string dumped = j.dump();
  const Solution back = solution_from_json(nlohmann::json::parse(dumped));
  CHECK(back.f == sol.f);
  CHECK(back.g == sol.g);
  CHECK(back.p.weights == sol.p.weights);
  CHECK(back.cost.values == sol.cost.values);
  CHECK(back.epsilon == sol.epsilon);
  CHECK(back.divergence.encode() == sol.divergence.encode());
  CHECK(back.coupling() == sol.coupling());
  CHECK(solution_to_json(back, false).at("coupling") == j.at("coupling"));
}

TEST_CASE("clt report json") {
  auto p = random_measure(3, 1, 21);
  auto q = random_measure(3, 1, 22);
  auto sol = solve(p, q, CostSpec{CostKind::SqEuclidean, 1}, Divergence::kl(), 1.0);
  auto j = clt_report_to_json(cost_clt_variance(sol));
  CHECK(j.at("kind") == "cost");
  CHECK(j.at("sigma2").get<double>() >= 0.0);
  CHECK(j.at("n") == 3);

  auto jp = clt_report_to_json(potential_clt_covariance(sol));
  CHECK(jp.at("kind") == "potential");
  CHECK(jp.at("covariance").size() == 6);
}

TEST_CASE("torus population json carries the quadrature report") {
  TorusQuadrature quad = TorusQuadrature::auto_for(1);
  quad.resolution = 1 << 20;
  auto pop = make_torus_population(1, 0.5, Divergence::quadratic(), quad);
  auto j = torus_population_to_json(pop);
  CHECK(j.at("d") == 1);
  CHECK(j.at("C").get<double>() == doctest::Approx(7.0 / 24.0).epsilon(1e-8));
  CHECK(j.at("quadrature").get<std::string>().find("tensor") == 0);
  CHECK(j.contains("quadrature_error_estimate"));
}
