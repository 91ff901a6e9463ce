#include <doctest.h>

#include <cmath>
#include <random>

#include "voie/normal.hpp"

using namespace voie;

TEST_SUITE_BEGIN("normal");

// Reference values computed with 30-digit arithmetic (sqrt(2)*erfinv(2p-1)).
TEST_CASE("quantile matches high-precision reference to 1e-9") {
  struct Ref {
    double p, z;
  };
  const Ref refs[] = {
      {0.5, 0.0},
      {0.975, 1.9599639845400542},
      {0.995, 2.5758293035489008},
      {0.9995, 3.2905267314918948},
      {0.001, -3.0902323061678135},
      {1e-6, -4.7534243088228989},
      {1e-10, -6.3613409024040562},
      {0.3, -0.52440051270804078},
      {0.7, 0.52440051270804078},
      {0.025, -1.9599639845400542},
      {0.05, -1.6448536269514727},
      {0.95, 1.6448536269514727},
      {0.99, 2.3263478740408411},
  };
  for (const Ref& r : refs) {
    CHECK(std::abs(normal_quantile(r.p) - r.z) < 1e-9);
  }
}

TEST_CASE("quantile and cdf are inverse") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(1e-8, 1.0 - 1e-8);
  for (int k = 0; k < 1000; ++k) {
    double p = unif(rng);
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("quantile is antisymmetric") {
  for (double p : {0.6, 0.75, 0.9, 0.99, 0.9999}) {
    CHECK(normal_quantile(p) ==
          doctest::Approx(-normal_quantile(1.0 - p)).epsilon(1e-12));
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(normal_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(z_alpha_half(1.5), std::domain_error);
  CHECK_THROWS_AS(z_alpha_half(-0.1), std::domain_error);
}

TEST_CASE("z_alpha_half at alpha = 0.05") {
  CHECK(std::abs(z_alpha_half(0.05) - 1.9599639845400542) < 1e-9);
}

TEST_SUITE_END();
