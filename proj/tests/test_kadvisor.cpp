#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "aghq/kadvisor.hpp"

using namespace aghq;

TEST_CASE("recommend_k published values") {
  struct Case {
    std::uint64_t M, m;
    int k;
  };
  for (auto c : {Case{294, 2, 11}, Case{100, 7, 2}, Case{100, 14, 1}, Case{200, 3, 6},
                 Case{200, 5, 3}, Case{1000, 3, 8}, Case{10000, 10, 4}, Case{38, 2, 6},
                 Case{100, 6, 2}}) {
    auto r = recommend_k(c.M, c.m);
    REQUIRE(r.k.has_value());
    CHECK_MESSAGE(*r.k == c.k, "M=" << c.M << " m=" << c.m);
    CHECK(r.rate_r == (c.k + 2) / 3);
    CHECK(r.eps_star == doctest::Approx(std::pow(double(c.m), -r.rate_r)));
  }
}

TEST_CASE("recommend_k edge cases") {
  for (std::uint64_t m : {2u, 3u, 50u, 1000u}) CHECK(*recommend_k(1, m).k == 1);
  auto unb = recommend_k(100, 1);
  CHECK(unb.unbounded());
  CHECK(unb.avoid_laplace());
  CHECK(!unb.guidance().empty());
  CHECK_THROWS_AS(recommend_k(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(recommend_k(3, 0), std::invalid_argument);
  CHECK(recommend_k(100, 7).avoid_laplace());
  CHECK(!recommend_k(100, 14).avoid_laplace());
}

TEST_CASE("recommend_k agrees with brute force on the relaxed inequality") {
  // The closed form inverts m^-((k+2)/3) <= M^-1/2 without the floor, so
  // the returned k is the smallest k >= 1 satisfying the relaxed inequality.
  for (std::uint64_t m = 2; m <= 40; ++m) {
    for (std::uint64_t M = 2; M <= 5000; M += (M < 100 ? 1 : 37)) {
      const double target = -0.5 * std::log(double(M));
      int brute = 0;
      for (int k = 1; k <= 60; ++k) {
        if (-(k + 2) / 3.0 * std::log(double(m)) <= target + 1e-12) {
          brute = k;
          break;
        }
      }
      REQUIRE(brute > 0);
      CHECK_MESSAGE(*recommend_k(M, m).k == brute, "M=" << M << " m=" << m);
    }
  }
}

TEST_CASE("recommend_k monotonicity") {
  for (std::uint64_t m = 2; m <= 30; ++m) {
    int prev = 1;
    for (std::uint64_t M = 1; M <= 3000; ++M) {
      const int k = *recommend_k(M, m).k;
      CHECK(k >= prev);
      prev = k;
    }
  }
  for (std::uint64_t M : {10u, 294u, 5000u}) {
    int prev = 1 << 30;
    for (std::uint64_t m = 2; m <= 200; ++m) {
      const int k = *recommend_k(M, m).k;
      CHECK(k <= prev);
      prev = k;
    }
  }
}

TEST_CASE("max_groups_for_k") {
  CHECK(max_groups_for_k(5, 5) == 625);
  CHECK(max_groups_for_k(2, 1) == 4);
  CHECK(max_groups_for_k(10, 4) == 10000);
  CHECK(max_groups_for_k(3, 3) == 9);
  CHECK_THROWS_AS(max_groups_for_k(1, 3), std::invalid_argument);
  CHECK_THROWS_AS(max_groups_for_k(2, 0), std::invalid_argument);
  CHECK_THROWS_AS(max_groups_for_k(1000, 40), std::overflow_error);
  // M = m^(2r) is the boundary: one more group breaks M^-1/2 >= m^-r.
  for (std::uint64_t m : {2u, 3u, 7u}) {
    for (int k = 1; k <= 9; ++k) {
      const auto M = max_groups_for_k(m, k);
      const int r = (k + 2) / 3;
      CHECK(-0.5 * std::log(double(M)) >= -r * std::log(double(m)) - 1e-12);
      CHECK(-0.5 * std::log(double(M + 1)) < -r * std::log(double(m)));
    }
  }
}
