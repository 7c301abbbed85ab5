#include <cmath>
#include <limits>

#include "doctest.h"
#include "gibbsbound/kl.hpp"
#include "gibbsbound/oracle.hpp"

using namespace gibbs;

namespace {
// Two-term formula in long double, independent of the library's branches.
long double kl_ref(long double p, long double q) {
  long double a = p == 0 ? 0.0L : p * std::log(p / q);
  long double b = p == 1 ? 0.0L : (1 - p) * std::log((1 - p) / (1 - q));
  return a + b;
}
}  // namespace

TEST_CASE("binary_kl reference values") {
  CHECK(binary_kl(0.5, 0.5) == 0.0);
  CHECK(binary_kl(0.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(binary_kl(0.1, 0.3) == doctest::Approx(0.116322).epsilon(1e-6));
  CHECK(binary_kl(0.1, 0.3) == doctest::Approx(static_cast<double>(kl_ref(0.1L, 0.3L))).epsilon(1e-14));
  CHECK(binary_kl(1.0, 0.5) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("binary_kl endpoint conventions") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(binary_kl(0.0, 0.0) == 0.0);
  CHECK(binary_kl(1.0, 1.0) == 0.0);
  CHECK(binary_kl(0.2, 0.0) == inf);
  CHECK(binary_kl(0.2, 1.0) == inf);
  CHECK(binary_kl(0.0, 1.0) == inf);
  CHECK_FALSE(std::isnan(binary_kl(1.0, 0.0)));
}

TEST_CASE("binary_kl is convex in q") {
  const double h = 1e-4;
  for (double p : {0.0, 0.05, 0.3, 0.5, 0.9}) {
    for (double q = 0.01; q < 0.99; q += 0.01) {
      const double second = binary_kl(p, q + h) - 2 * binary_kl(p, q) + binary_kl(p, q - h);
      CHECK(second / (h * h) >= -1e-9);
    }
  }
}

TEST_CASE("binary_kl_inverse examples") {
  for (double p : {0.0, 0.2, 0.7, 1.0}) CHECK(binary_kl_inverse(p, 0.0) == p);
  CHECK(binary_kl_inverse(0.0, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(binary_kl_inverse(0.1, 0.116322) == doctest::Approx(0.3).epsilon(1e-5));
  CHECK(binary_kl_inverse(0.1, binary_kl(0.1, 0.3)) == doctest::Approx(0.3).epsilon(1e-13));
  CHECK(binary_kl_inverse(0.5, 1e6) == 1.0);
  CHECK(binary_kl_inverse(1.0, 0.3) == 1.0);
}

TEST_CASE("binary_kl_inverse is the smallest admissible q") {
  for (double p : {0.0, 0.1, 0.45, 0.8}) {
    for (double t : {1e-6, 0.01, 0.3, 1.5}) {
      const double q = binary_kl_inverse(p, t);
      if (q >= 1.0) continue;
      CHECK(binary_kl(p, q) >= t);
      CHECK(binary_kl(p, std::nextafter(q, 0.0)) < t);
    }
  }
}

TEST_CASE("binary_kl_inverse is nondecreasing in both arguments") {
  const int g = 100;
  for (int i = 0; i < g; ++i) {
    const double p = 0.99 * i / (g - 1);
    double prev = 0.0;
    for (int j = 0; j < g; ++j) {
      const double q = binary_kl_inverse(p, 3.0 * j / (g - 1));
      CHECK(q >= prev);
      prev = q;
    }
  }
  for (int j = 0; j < g; ++j) {
    const double t = 3.0 * j / (g - 1);
    double prev = 0.0;
    for (int i = 0; i < g; ++i) {
      const double q = binary_kl_inverse(0.99 * i / (g - 1), t);
      CHECK(q >= prev);
      prev = q;
    }
  }
}

TEST_CASE("round trip holds up to double resolution of q") {
  RoundTripOptions opt;
  const auto st = kl_round_trip(opt);
  CHECK(st.evaluated > 9000);
  CHECK(st.unexplained == 0);
}

TEST_CASE("a loose bisection tolerance breaks the round trip") {
  RoundTripOptions opt;
  opt.inverse_tolerance = 1e-2;
  CHECK_FALSE(kl_round_trip_suite(opt).passed());
}
