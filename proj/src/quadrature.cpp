#include "aghq/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace aghq {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178; // log(sqrt(2 pi))

// Evaluates sum_{j<k} p_j(x)^2 for the orthonormal (w.r.t. N(0,1))
// Hermite polynomials, plus p_k(x) and p_k'(x) for Newton refinement.
struct HermiteEval {
  double christoffel_sum;
  double pk;
  double dpk;
};

HermiteEval eval_orthonormal(int k, double x) {
  double p_prev = 0.0;
  double p = 1.0;
  double dp_prev = 0.0;
  double dp = 0.0;
  double sum = 0.0;
  for (int n = 0; n < k; ++n) {
    sum += p * p;
    // sqrt(n+1) p_{n+1} = x p_n - sqrt(n) p_{n-1}
    const double a = std::sqrt(static_cast<double>(n + 1));
    const double b = std::sqrt(static_cast<double>(n));
    const double p_next = (x * p - b * p_prev) / a;
    const double dp_next = (p + x * dp - b * dp_prev) / a;
    p_prev = p;
    p = p_next;
    dp_prev = dp;
    dp = dp_next;
  }
  return {sum, p, dp};
}

} // namespace

QuadratureRule::QuadratureRule(int order, Eigen::MatrixXd points,
                               std::vector<double> log_weights)
    : order_(order), points_(std::move(points)), log_weights_(std::move(log_weights)) {
  if (static_cast<std::size_t>(points_.cols()) != log_weights_.size())
    throw std::invalid_argument("QuadratureRule: point/weight count mismatch");
  weights_.resize(log_weights_.size());
  log_adapted_.resize(log_weights_.size());
  for (std::size_t i = 0; i < log_weights_.size(); ++i) {
    weights_[i] = std::exp(log_weights_[i]);
    log_adapted_[i] = log_weights_[i] + 0.5 * point(i).squaredNorm();
  }
}

QuadratureRule hermite_rule(int k) {
  if (k < 1 || k > kMaxHermiteOrder)
    throw std::out_of_range("hermite_rule: k must be in [1, " +
                            std::to_string(kMaxHermiteOrder) + "], got " +
                            std::to_string(k));

  // Golub-Welsch: eigenvalues of the Jacobi matrix with zero diagonal and
  // off-diagonal sqrt(n) are the nodes.
  Eigen::VectorXd nodes(k);
  if (k == 1) {
    nodes(0) = 0.0;
  } else {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd sub(k - 1);
    for (int n = 1; n < k; ++n) sub(n - 1) = std::sqrt(static_cast<double>(n));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    nodes = es.eigenvalues();
  }

  // Newton polish on p_k, then enforce z -> -z symmetry exactly.
  for (int i = 0; i < k; ++i) {
    double x = nodes(i);
    for (int it = 0; it < 3; ++it) {
      const HermiteEval e = eval_orthonormal(k, x);
      if (e.dpk == 0.0) break;
      const double step = e.pk / e.dpk;
      x -= step;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(x))) break;
    }
    nodes(i) = x;
  }
  for (int i = 0; i < k / 2; ++i) {
    const double mag = 0.5 * (std::abs(nodes(i)) + std::abs(nodes(k - 1 - i)));
    nodes(i) = -mag;
    nodes(k - 1 - i) = mag;
  }
  if (k % 2 == 1) nodes(k / 2) = 0.0;

  // Weights from the Christoffel function, which keeps full relative
  // accuracy in the tails where eigenvector components lose it.
  std::vector<double> log_w(k);
  for (int i = 0; i < k; ++i)
    log_w[i] = kLogSqrt2Pi - std::log(eval_orthonormal(k, nodes(i)).christoffel_sum);
  for (int i = 0; i < k / 2; ++i) {
    const double avg = 0.5 * (log_w[i] + log_w[k - 1 - i]);
    log_w[i] = avg;
    log_w[k - 1 - i] = avg;
  }

  return QuadratureRule(k, nodes.transpose(), std::move(log_w));
}

QuadratureRule product_rule(const QuadratureRule &base, int p) {
  if (base.dim() != 1)
    throw std::invalid_argument("product_rule: base rule must be one-dimensional");
  if (p < 1) throw std::out_of_range("product_rule: dimension must be >= 1");

  const std::size_t k = base.size();
  std::size_t total = 1;
  for (int j = 0; j < p; ++j) {
    if (total > kMaxProductNodes / k)
      throw std::out_of_range("product_rule: k^p exceeds node budget of " +
                              std::to_string(kMaxProductNodes));
    total *= k;
  }

  Eigen::MatrixXd pts(p, static_cast<Eigen::Index>(total));
  std::vector<double> log_w(total, 0.0);
  std::vector<std::size_t> idx(p, 0);
  for (std::size_t n = 0; n < total; ++n) {
    for (int j = 0; j < p; ++j) {
      pts(j, static_cast<Eigen::Index>(n)) = base.point(idx[j])(0);
      log_w[n] += base.log_kernel_weight(idx[j]);
    }
    for (int j = 0; j < p; ++j) {
      if (++idx[j] < k) break;
      idx[j] = 0;
    }
  }
  return QuadratureRule(base.order(), std::move(pts), std::move(log_w));
}

QuadratureRule gauss_hermite(int k, int p) { return product_rule(hermite_rule(k), p); }

double adapted_weight(const QuadratureRule &rule, std::size_t node_index) {
  if (node_index >= rule.size())
    throw std::out_of_range("adapted_weight: node index " + std::to_string(node_index) +
                            " out of range");
  return std::exp(rule.log_adapted_weight(node_index));
}

} // namespace aghq
