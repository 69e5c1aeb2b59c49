#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "vceval/distributions.hpp"

using namespace vceval;
namespace bm = boost::math;

TEST_SUITE("distributions") {

TEST_CASE("normal against Boost") {
  const bm::normal n;
  for (double z = -37.0; z <= 8.0; z += 0.25) {
    CHECK(dist::normal_cdf(z) == doctest::Approx(bm::cdf(n, z)).epsilon(1e-12));
    CHECK(dist::normal_sf(z) == doctest::Approx(bm::cdf(bm::complement(n, z))).epsilon(1e-12));
  }
  for (double p : {1e-300, 1e-12, 1e-5, 0.01, 0.2, 0.5, 0.77, 0.975, 0.999999}) {
    CHECK(dist::normal_quantile(p) == doctest::Approx(bm::quantile(n, p)).epsilon(1e-13));
  }
}

TEST_CASE("incomplete gamma and beta against Boost") {
  for (double a : {0.5, 1.0, 2.5, 7.0, 30.0}) {
    for (double x : {0.01, 0.5, 1.0, 3.0, 10.0, 40.0}) {
      CHECK(dist::gamma_p(a, x) == doctest::Approx(bm::gamma_p(a, x)).epsilon(1e-12));
      CHECK(dist::gamma_q(a, x) == doctest::Approx(bm::gamma_q(a, x)).epsilon(1e-10));
    }
  }
  for (double a : {0.5, 1.0, 3.0, 12.0}) {
    for (double b : {0.5, 2.0, 6.0, 40.0}) {
      for (double x : {0.001, 0.1, 0.5, 0.9, 0.999}) {
        CHECK(dist::beta_inc(a, b, x) == doctest::Approx(bm::ibeta(a, b, x)).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("chi-square and F tails against Boost") {
  for (double df : {1.0, 2.0, 5.0, 14.0}) {
    const bm::chi_squared c(df);
    for (double x : {0.1, 1.0, 2.4, 7.5, 25.0}) {
      CHECK(dist::chi_square_sf(x, df) == doctest::Approx(bm::cdf(bm::complement(c, x))).epsilon(1e-10));
    }
  }
  for (double d1 : {1.0, 2.0, 4.0}) {
    for (double d2 : {2.0, 12.0, 60.0}) {
      const bm::fisher_f f(d1, d2);
      for (double x : {0.2, 1.0, 3.5, 8.0, 21.0}) {
        CHECK(dist::f_sf(x, d1, d2) == doctest::Approx(bm::cdf(bm::complement(f, x))).epsilon(1e-10));
      }
    }
  }
  CHECK(dist::f_sf(8.0, 1, 2) == doctest::Approx(0.10557280900008414).epsilon(1e-12));
  CHECK(dist::chi_square_sf(2.4, 1) == doctest::Approx(0.12133525035848208).epsilon(1e-12));
}

TEST_CASE("studentized range against frozen SciPy values") {
  struct Case {
    double q;
    int k;
    double df;
    double cdf;
  };
  const Case cases[] = {
      {4.655781, 3, 12, 0.9835887484196685}, {3.5, 3, 12, 0.9300045147248164}, {1.0, 3, 12, 0.2360181039227479},
      {2.0, 2, 5, 0.7835627707303147},       {3.0, 4, 20, 0.8195265485308926}, {5.0, 5, 10, 0.9657931419500596},
      {3.3, 3, 1000, 0.9482425181093181},    {2.5, 6, 3, 0.4221555335999073},
  };
  for (const auto& c : cases) {
    CHECK(std::abs(dist::studentized_range_cdf(c.q, c.k, c.df) - c.cdf) <= 1e-9);
    CHECK(std::abs(dist::studentized_range_sf(c.q, c.k, c.df) - (1.0 - c.cdf)) <= 1e-9);
  }
  CHECK(std::abs(dist::studentized_range_quantile(0.95, 3, 12) - 3.772928965726967) <= 1e-8);
}

TEST_CASE("studentized range with two groups is a scaled |t|") {
  // Range of two means over s equals sqrt(2)|t|, so P(Q <= q) = P(|T| <= q / sqrt 2).
  for (double df : {3.0, 8.0, 30.0}) {
    const bm::fisher_f f(1.0, df);
    for (double q : {0.5, 1.7, 3.2, 5.0}) {
      const double t2 = q * q / 2.0;
      CHECK(dist::studentized_range_cdf(q, 2, df) == doctest::Approx(bm::cdf(f, t2)).epsilon(1e-9));
    }
  }
}

TEST_CASE("studentized range is monotone in q") {
  double prev = 0.0;
  for (double q = 0.0; q < 8.0; q += 0.2) {
    const double c = dist::studentized_range_cdf(q, 4, 15);
    CHECK(c >= prev - 1e-14);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    prev = c;
  }
}

}
