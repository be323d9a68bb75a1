#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace aghq {

/// Largest supported number of points per coordinate.
inline constexpr int kMaxHermiteOrder = 200;
/// Largest number of grid points a product rule may have.
inline constexpr std::size_t kMaxProductNodes = 1'000'000;

/**
 * Gauss-Hermite rule with respect to the kernel exp(-|z|^2 / 2) on R^p.
 *
 * Nodes are stored column-wise in `points` (dim x size). Kernel weights are
 * kept both directly and in log form; `log_adapted_weights` holds
 * log(v) + |z|^2 / 2, the weight attached to an integrand that does not
 * contain the Gaussian kernel. For k = 1 that weight is (2 pi)^(p/2).
 */
class QuadratureRule {
public:
  QuadratureRule(int order, Eigen::MatrixXd points, std::vector<double> log_weights);

  int dim() const noexcept { return static_cast<int>(points_.rows()); }
  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return log_weights_.size(); }

  const Eigen::MatrixXd &points() const noexcept { return points_; }
  Eigen::MatrixXd::ConstColXpr point(std::size_t i) const {
    return points_.col(static_cast<Eigen::Index>(i));
  }

  double kernel_weight(std::size_t i) const { return weights_[i]; }
  double log_kernel_weight(std::size_t i) const { return log_weights_[i]; }
  const std::vector<double> &kernel_weights() const noexcept { return weights_; }

  /// log of omega(z_i) = v_i * exp(|z_i|^2 / 2).
  double log_adapted_weight(std::size_t i) const { return log_adapted_[i]; }

private:
  int order_;
  Eigen::MatrixXd points_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<double> log_adapted_;
};

/// k-point rule in one dimension. Throws std::out_of_range unless
/// 1 <= k <= kMaxHermiteOrder.
QuadratureRule hermite_rule(int k);

/// p-fold tensor product of a one-dimensional rule. Node ordering is
/// lexicographic with the first coordinate varying fastest.
QuadratureRule product_rule(const QuadratureRule &base, int p);

/// Convenience: product_rule(hermite_rule(k), p).
QuadratureRule gauss_hermite(int k, int p);

/// omega(z) = v * exp(|z|^2 / 2). Throws std::out_of_range on a bad index.
double adapted_weight(const QuadratureRule &rule, std::size_t node_index);

} // namespace aghq
