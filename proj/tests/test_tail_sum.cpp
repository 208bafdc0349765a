#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rcf/tail_sum.hpp"

using namespace rcf;

namespace {

// brute-force partial sum over [start, stop] with compensated accumulation;
// the independent oracle for everything below
long double partial_sum(double s, int j, double start, double xi, double stop) {
  long double sum = 0;
  for (double a = start; a <= stop; a += 1.0) {
    long double y = static_cast<long double>(a) + xi;
    long double t = std::pow(y, static_cast<long double>(-s));
    for (int i = 0; i < j; ++i) t *= std::log(y);
    sum += t;
  }
  return sum;
}

}  // namespace

TEST_CASE("tail_sum exact anchors") {
  // Basel sum and its shift
  CHECK(tail_sum(1.0, 1, 0.0, 0) == Catch::Approx(1.6449340668482264).epsilon(1e-12));
  CHECK(tail_sum(1.0, 1, 1.0, 0) == Catch::Approx(0.6449340668482264).epsilon(1e-12));
  // sum log(a)/a^2 = -zeta'(2), sum log^2(a)/a^2 = zeta''(2)
  CHECK(tail_sum(1.0, 1, 0.0, 1) == Catch::Approx(0.9375482543158438).epsilon(1e-12));
  CHECK(tail_sum(1.0, 1, 0.0, 2) == Catch::Approx(1.9892802342989010).epsilon(1e-12));
}

TEST_CASE("tail_sum frozen high-precision references") {
  // 60-digit explicit summation to 3e6 plus a far-out remainder
  CHECK(power_log_tail(1.5, 1, 100.0, 0.003) ==
        Catch::Approx(1.3233276411709490).epsilon(1e-11));
  CHECK(power_log_tail(1.2, 3, 5.0, 0.25) ==
        Catch::Approx(3748.8537587501083).epsilon(1e-11));
}

TEST_CASE("tail_sum differences reproduce brute-force partial sums") {
  struct Case { double s; int j; double start, xi, stop; };
  for (const Case& c : {Case{1.5, 1, 100, 0.003, 5000}, Case{1.2, 0, 2, 0.4, 3000},
                        Case{2.0, 4, 7, 0.0, 2000}, Case{1.05, 2, 50, 0.9, 4000}}) {
    double mine = power_log_tail(c.s, c.j, c.start, c.xi) -
                  power_log_tail(c.s, c.j, c.stop + 1.0, c.xi);
    long double oracle = partial_sum(c.s, c.j, c.start, c.xi, c.stop);
    CHECK(mine == Catch::Approx(static_cast<double>(oracle)).epsilon(1e-10));
  }
}

TEST_CASE("tail_sum handles large starts without explicit summation") {
  // pure Euler-Maclaurin region; check against the difference oracle
  double a = power_log_tail(1.5, 0, 1e8, 0.1);
  double b = power_log_tail(1.5, 0, 1e8 + 2000, 0.1);
  long double oracle = partial_sum(1.5, 0, 1e8, 0.1, 1e8 + 1999);
  CHECK(a - b == Catch::Approx(static_cast<double>(oracle)).epsilon(1e-9));
  CHECK(a == Catch::Approx(2.0 / std::sqrt(1e8)).epsilon(1e-3));
}

TEST_CASE("tail_sum rejects divergent and malformed input") {
  CHECK_THROWS_AS(tail_sum(0.5, 10, 0.0, 0), std::domain_error);
  CHECK_THROWS_AS(tail_sum(0.25, 10, 0.0, 0), std::domain_error);
  CHECK_THROWS_AS(power_log_tail(1.5, 5, 10.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(power_log_tail(1.5, 0, 0.5, 0.0), std::domain_error);
}

TEST_CASE("smooth tail in log space matches the linear evaluation") {
  for (double s : {1.1, 1.5, 2.0}) {
    for (double y : {130.0, 1e4, 1e8}) {
      double lin = detail::em_tail(s, 0, y);
      double viaLog = std::exp(detail::em_log_tail(s, std::log(y)));
      CHECK(viaLog == Catch::Approx(lin).epsilon(1e-12));
    }
  }
}
