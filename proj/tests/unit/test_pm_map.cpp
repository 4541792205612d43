#include <doctest.h>

#include <cmath>
#include <set>

#include "seqpm/errors.hpp"
#include "seqpm/pm_map.hpp"

using namespace seqpm;

namespace {

// Plain bisection on the left branch, no Newton: an independent root finder.
double bisect_left(double beta, double y) {
  double lo = 0.0, hi = 0.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double v = mid + std::pow(2.0, beta) * std::pow(mid, 1.0 + beta);
    (v < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("apply_map fixed points and branch tops") {
  for (double b : {0.01, 0.1, 0.2, 0.5, 0.9}) {
    const MapParameter p(b);
    CHECK(apply_map(p, 0.0) == 0.0);
    CHECK(apply_map(p, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(apply_map(p, 0.75) == 0.5);
  }
}

TEST_CASE("apply_map against 50-digit values") {
  // mpmath, 50 digits: 0.25 + 2^0.1 * 0.25^1.1
  CHECK(std::abs(apply_map(MapParameter(0.1), 0.25) - 0.48325824788420185399533581653748554) < 1e-15);
}

TEST_CASE("map_derivative") {
  CHECK(map_derivative(MapParameter(0.3), 0.0) == 1.0);
  CHECK(map_derivative(MapParameter(0.3), 0.9) == 2.0);
  // 1 + 2^0.1 * 1.1 * 0.5^0.1 = 2.1 exactly in real arithmetic.
  CHECK(std::abs(map_derivative(MapParameter(0.1), 0.5) - 2.1) < 1e-14);
}

TEST_CASE("inverse branches") {
  CHECK(inverse_left(MapParameter(0.2), 0.0) == 0.0);
  CHECK(inverse_left(MapParameter(0.2), 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(inverse_right(0.0) == 0.5);
  CHECK(inverse_right(1.0) == 1.0);
  CHECK(inverse_right(0.4) == doctest::Approx(0.7).epsilon(1e-15));

  const double z = inverse_left(MapParameter(0.2), 0.7);
  CHECK(std::abs(z - bisect_left(0.2, 0.7)) < 1e-12);
  // mpmath findroot, 50 digits
  CHECK(std::abs(z - 0.36136152799226233167532086830635) < 1e-15);

  SUBCASE("round trip near the indifferent point") {
    for (double y : {1e-300, 1e-30, 1e-12, 1e-6, 0.3, 0.999}) {
      const double x = inverse_left(MapParameter(0.15), y);
      CHECK(apply_map(MapParameter(0.15), x) == doctest::Approx(y).epsilon(1e-14));
    }
  }
}

TEST_CASE("MapParameter rejects exponents outside (0, 1)") {
  CHECK_THROWS_AS(MapParameter(0.0), DomainError);
  CHECK_THROWS_AS(MapParameter(1.0), DomainError);
  CHECK_THROWS_AS(MapParameter(-0.1), DomainError);
}

TEST_CASE("iterate_schedule") {
  const auto s = MapSchedule::constant(0.2, 0.2);
  const auto zero = iterate_schedule(s, 0.0, 10);
  CHECK(zero.size() == 11);
  for (double x : zero) CHECK(x == 0.0);

  const auto two = iterate_schedule(MapSchedule::explicit_list({0.05, 0.1}, 0.1), 0.75, 1);
  CHECK(two == std::vector<double>{0.75, 0.5});

  // Five compositions against mpmath at 50 digits.
  const auto orbit = iterate_schedule(s, 0.3, 5);
  const double expected[] = {0.57086413543423028648, 0.14172827086846057297, 0.25187048065040319367,
                             0.47146359812874178666, 0.93741840756091711455};
  for (int k = 0; k < 5; ++k) CHECK(std::abs(orbit[k + 1] - expected[k]) < 1e-13);

  double x = 0.3;
  for (int k = 1; k <= 5; ++k) {
    x = apply_map(MapParameter(0.2), x);
    CHECK(orbit[k] == x);
  }
}

TEST_CASE("schedules") {
  SUBCASE("constant and explicit") {
    const auto c = MapSchedule::constant(0.1, 0.2);
    CHECK(c.beta(1) == 0.1);
    CHECK(c.beta(1000000) == 0.1);
    CHECK_THROWS_AS(c.beta(0), DomainError);
    const auto l = MapSchedule::explicit_list({0.05, 0.1, 0.15}, 0.15);
    CHECK(l.beta(3) == 0.15);
    CHECK(l.length() == 3u);
    CHECK_THROWS_AS(l.beta(4), ScheduleExhausted);
    CHECK_THROWS_AS(MapSchedule::explicit_list({0.05, 0.3}, 0.2), DomainError);
    CHECK_THROWS_AS(MapSchedule::constant(0.2, 0.1), DomainError);
    // The cap is inclusive: beta = alpha is the stationary case.
    CHECK_NOTHROW(MapSchedule::constant(0.2, 0.2));
  }
  SUBCASE("nearby window") {
    const auto s = MapSchedule::nearby(0.1, 0.02, 7, 0.125);
    for (std::size_t k = 1; k <= 5000; ++k) {
      CHECK(s.beta(k) > 0.08);
      CHECK(s.beta(k) < 0.12);
    }
    CHECK_FALSE(s.finite_support().has_value());
    const auto flat = MapSchedule::nearby(0.1, 0.0, 7, 0.125);
    CHECK(flat.beta(17) == 0.1);
    CHECK_THROWS_AS(MapSchedule::nearby(0.1, 0.1, 7, 0.125), DomainError);
  }
  SUBCASE("iid symbols are deterministic and follow the weights") {
    const auto a = MapSchedule::iid_random({0.05, 0.1}, {0.25, 0.75}, 42, 0.1);
    const auto b = MapSchedule::iid_random({0.05, 0.1}, {0.25, 0.75}, 42, 0.1);
    std::size_t ones = 0;
    for (std::size_t k = 1; k <= 20000; ++k) {
      CHECK(a.beta(k) == b.beta(k));
      ones += a.symbol(k);
    }
    CHECK(std::abs(ones / 20000.0 - 0.75) < 0.02);
    const auto other = MapSchedule::iid_random({0.05, 0.1}, {0.25, 0.75}, 43, 0.1);
    std::size_t differ = 0;
    for (std::size_t k = 1; k <= 100; ++k) differ += a.beta(k) != other.beta(k);
    CHECK(differ > 10);
    CHECK(a.finite_support() == std::vector<double>{0.05, 0.1});
  }
  SUBCASE("iid probability vector must sum to one") {
    try {
      MapSchedule::iid_random({0.05, 0.1}, {0.5, 0.4}, 1, 0.1);
      FAIL("accepted probabilities summing to 0.9");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("0.9") != std::string::npos);
    }
  }
  SUBCASE("single-symbol alphabet is the constant schedule") {
    const auto s = MapSchedule::iid_random({0.1}, {1.0}, 9, 0.1);
    for (std::size_t k = 1; k <= 100; ++k) CHECK(s.beta(k) == 0.1);
  }
}
