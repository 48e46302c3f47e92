#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rotlab/divergence.hpp"

using rotlab::Divergence;
using rotlab::DivergenceFamily;

namespace {

// grid avoiding the +-1e-3 neighborhood of the truncation kink at 0
std::vector<double> kink_free_grid() {
  std::vector<double> ts;
  for (double t = -10.0; t <= 10.0; t += 0.173) {
    if (std::abs(t) < 1e-3 + 0.2) continue;  // stay clear of 0 for difference stencils
    ts.push_back(t);
  }
  return ts;
}

std::vector<Divergence> all_families() {
  return {Divergence::kl(), Divergence::tsallis(1.5), Divergence::tsallis(1.2),
          Divergence::tsallis(1.8), Divergence::quadratic()};
}

}  // namespace

TEST_CASE("construction and validation") {
  CHECK(Divergence::kl().family() == DivergenceFamily::KL);
  CHECK(Divergence::tsallis(1.5).beta() == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(Divergence::quadratic().outside_c2_class());
  CHECK(Divergence::tsallis(2.0).outside_c2_class());  // boundary case folds to quadratic
  CHECK_FALSE(Divergence::tsallis(1.5).outside_c2_class());
  CHECK_THROWS_AS(Divergence::tsallis(1.0), std::invalid_argument);
  CHECK_THROWS_AS(Divergence::tsallis(0.5), std::invalid_argument);
  CHECK_THROWS_AS(Divergence::tsallis(2.5), std::invalid_argument);
}

TEST_CASE("string encoding round trip") {
  for (const char* s : {"kl", "tsallis:1.5", "quad"})
    CHECK(Divergence::parse(s).encode() == s);
  CHECK_THROWS_AS(Divergence::parse("entropy"), std::invalid_argument);
  CHECK_THROWS_AS(Divergence::parse("tsallis:abc"), std::invalid_argument);
}

TEST_CASE("psi closed forms") {
  CHECK(Divergence::kl().psi(1.0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  // Tsallis 1.5: psi(x) = x_+^3/3 + 2/3
  CHECK(Divergence::tsallis(1.5).psi(2.0, 0) == doctest::Approx(10.0 / 3.0).epsilon(1e-15));
  // quadratic: psi(x) = x_+^2/2 + 1/2, truncated below zero
  CHECK(Divergence::quadratic().psi(-1.0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(Divergence::tsallis(1.5).psi(1.0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  // exact truncation below zero
  for (auto div : {Divergence::tsallis(1.5), Divergence::quadratic()}) {
    CHECK(div.psi(-2.0, 1) == 0.0);
    CHECK(div.psi(-2.0, 2) == 0.0);
    CHECK(div.psi(-2.0, 0) == 1.0 / div.alpha());
  }
}

TEST_CASE("phi values and domain") {
  CHECK(Divergence::kl().phi(1.0) == 0.0);
  CHECK(Divergence::kl().phi(0.0) == 0.0);
  const double expect = 2.0 / 3.0 * (2.0 * std::sqrt(2.0) - 1.0);  // = 1.218951...
  CHECK(Divergence::tsallis(1.5).phi(2.0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(Divergence::quadratic().phi(0.0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(Divergence::tsallis(1.5).phi(0.0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(Divergence::kl().phi(-0.1), std::invalid_argument);
}

TEST_CASE("psi' nondecreasing and psi'' nonnegative on grid") {
  for (const auto& div : all_families()) {
    double prev = -1e300;
    for (double t = -10.0; t <= 10.0; t += 0.05) {
      const double d1 = div.psi(t, 1);
      CHECK(d1 >= prev - 1e-14);
      CHECK(div.psi(t, 2) >= 0.0);
      prev = d1;
    }
    for (double t = div.t0() - 0.1; t <= 10.0; t += 0.1) CHECK(div.psi(t, 2) > 0.0);
  }
}

TEST_CASE("derivatives match central differences away from the kink") {
  const double h = 1e-6;
  for (const auto& div : all_families()) {
    for (double t : kink_free_grid()) {
      const double d1 = div.psi(t, 1);
      const double cd1 = (div.psi(t + h, 0) - div.psi(t - h, 0)) / (2.0 * h);
      const double scale1 = std::max(std::abs(d1), 1e-8);
      CHECK(std::abs(d1 - cd1) / scale1 <= 1e-6);

      const double d2 = div.psi(t, 2);
      const double cd2 = (div.psi(t + h, 1) - div.psi(t - h, 1)) / (2.0 * h);
      const double scale2 = std::max(std::abs(d2), 1e-8);
      CHECK(std::abs(d2 - cd2) / scale2 <= 1e-6);
    }
  }
}

TEST_CASE("fenchel consistency: psi(phi'(t)) = t phi'(t) - phi(t)") {
  const double h = 1e-6;
  for (const auto& div : all_families()) {
    for (double t = 0.05; t <= 5.0; t += 0.11) {
      const double y = (div.phi(t + h) - div.phi(t - h)) / (2.0 * h);
      const double lhs = div.psi(y, 0);
      const double rhs = t * y - div.phi(t);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
    }
  }
}

TEST_CASE("young's inequality") {
  for (const auto& div : all_families()) {
    for (double t = 0.0; t <= 4.0; t += 0.37) {
      for (double y = -3.0; y <= 3.0; y += 0.29) {
        CHECK(div.phi(t) + div.psi(y, 0) - t * y >= -1e-10);
      }
    }
  }
}
