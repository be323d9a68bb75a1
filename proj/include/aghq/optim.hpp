#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Core>

namespace aghq {

/// Objective to maximize. May return -inf (or throw) where undefined.
using Objective = std::function<double(const Eigen::VectorXd &)>;

struct OptimOptions {
  double grad_tol = 1e-6; ///< on the infinity norm of the gradient
  int max_evals = 20000;
  double max_step = 5.0; ///< cap on the infinity norm of a trial step
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd grad;
  bool converged = false;
  bool used_simplex = false;
  int n_evals = 0;
  int iterations = 0;
  std::string message;
};

/// Central differences with h_j = cbrt(eps) * (1 + |x_j|). Costs 2n calls.
Eigen::VectorXd fd_gradient(const Objective &f, const Eigen::VectorXd &x);

/// Central-difference Hessian with h_j = eps^(1/4) * (1 + |x_j|).
Eigen::MatrixXd fd_hessian(const Objective &f, const Eigen::VectorXd &x);

/**
 * Maximizes f by BFGS on finite-difference gradients with a backtracking
 * line search. If the line search stalls before the gradient tolerance is
 * met, a Nelder-Mead simplex runs from the current point and BFGS restarts
 * once from its result. The best point seen is always returned.
 */
OptimResult maximize(const Objective &f, const Eigen::VectorXd &x0,
                     const OptimOptions &options = {});

/// Inverse of the negated Hessian, or nullopt when that is not positive
/// definite (not an interior maximum) or not finite.
std::optional<Eigen::MatrixXd> vcov_from_hessian(const Objective &loglik,
                                                 const Eigen::VectorXd &at);

} // namespace aghq
