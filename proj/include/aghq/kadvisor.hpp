#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace aghq {

/// Error-rate exponent of adaptive quadrature with k points per coordinate:
/// floor((k + 2) / 3).
int rate_exponent(int k);

/**
 * Recommended minimum number of adaptive quadrature points for M groups
 * whose smallest group has m observations: ceil(1.5 log_m(M) - 2), at
 * least 1. With m = 1 no finite k is recommended (`k` is empty).
 */
struct KRecommendation {
  std::uint64_t M = 0;
  std::uint64_t m = 0;
  std::optional<int> k;
  int rate_r = 0;        ///< rate_exponent(k); 0 when unbounded
  double eps_star = 0.0; ///< m^-rate_r; 1 when unbounded

  bool unbounded() const noexcept { return !k.has_value(); }
  /// True when the Laplace approximation (k = 1) falls short.
  bool avoid_laplace() const noexcept { return !k || *k > 1; }
  std::string guidance() const;
};

/// Throws std::invalid_argument when M or m is 0.
KRecommendation recommend_k(std::uint64_t M, std::uint64_t m);

/// Largest M with M^(-1/2) >= m^(-r(k)), i.e. m^(2 r(k)). Throws
/// std::overflow_error when that exceeds 2^64 - 1 and
/// std::invalid_argument when m < 2 or k < 1.
std::uint64_t max_groups_for_k(std::uint64_t m, int k);

} // namespace aghq
