#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace aghq {

/// log(sum(exp(x))) shifted by the maximum. Empty input gives -inf.
inline double log_sum_exp(std::span<const double> x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

} // namespace aghq
