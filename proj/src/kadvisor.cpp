#include "aghq/kadvisor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace aghq {

int rate_exponent(int k) {
  if (k < 1) throw std::invalid_argument("rate_exponent: k must be >= 1");
  return (k + 2) / 3;
}

KRecommendation recommend_k(std::uint64_t M, std::uint64_t m) {
  if (M == 0) throw std::invalid_argument("recommend_k: number of groups must be >= 1");
  if (m == 0) throw std::invalid_argument("recommend_k: group size must be >= 1");
  KRecommendation r;
  r.M = M;
  r.m = m;
  if (m == 1) {
    r.eps_star = 1.0;
    return r;
  }
  double x = 1.5 * std::log(static_cast<double>(M)) / std::log(static_cast<double>(m)) - 2.0;
  // log ratios such as log(10000)/log(10) land a few ulps off the integer.
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9) x = nearest;
  const double c = std::ceil(x);
  r.k = c < 1.0 ? 1 : static_cast<int>(c);
  r.rate_r = rate_exponent(*r.k);
  r.eps_star = std::pow(static_cast<double>(m), -r.rate_r);
  return r;
}

std::string KRecommendation::guidance() const {
  if (!k)
    return "groups of size 1 carry no concentration: no finite number of quadrature points "
           "is recommended; prefer a large k and check stability of the estimates";
  if (*k > 1)
    return "avoid the Laplace approximation: use at least k = " + std::to_string(*k) +
           " adaptive quadrature points";
  return "the Laplace approximation (k = 1) is adequate";
}

std::uint64_t max_groups_for_k(std::uint64_t m, int k) {
  if (m < 2) throw std::invalid_argument("max_groups_for_k: m must be >= 2");
  const int power = 2 * rate_exponent(k);
  std::uint64_t out = 1;
  for (int i = 0; i < power; ++i) {
    if (out > std::numeric_limits<std::uint64_t>::max() / m)
      throw std::overflow_error("max_groups_for_k: m^" + std::to_string(power) +
                                " exceeds 64-bit range");
    out *= m;
  }
  return out;
}

} // namespace aghq
