#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aghq/data.hpp"
#include "aghq/families.hpp"
#include "aghq/inner.hpp"
#include "aghq/marglik.hpp"

namespace aghq {

struct FitOptions {
  Method method = Method::AQ;
  double outer_tol = 1e-6;
  int max_evals = 20000;
  std::optional<Parameters> start;
  /// Unconstrained transform of positive parameters during the search.
  PositiveTransform transform = PositiveTransform::log;
  AdaptOptions adapt;
  bool compute_vcov = true;
};

struct FitDiagnostics {
  int optimizer_iterations = 0;
  bool simplex_used = false;
  long inner_iterations = 0;
  long jitter_count = 0;
  int failed_evaluations = 0; ///< points where the likelihood could not be formed
  int hessian_evals = 0;
  double grad_inf_norm = 0.0;
  std::string message;
};

/**
 * Maximum-likelihood fit. `estimates`, `vcov` and `std_errors` live on the
 * reporting scale: beta as is, positive parameters (and the log-Cholesky
 * diagonal) on the log scale. `vcov` is absent when the observed information
 * is not positive definite; `std_errors` are then NaN.
 */
struct FitResult {
  Parameters params_hat;
  Eigen::VectorXd estimates;
  std::vector<std::string> names;
  std::vector<bool> log_scale;
  double loglik = 0.0;
  std::optional<Eigen::MatrixXd> vcov;
  Eigen::VectorXd std_errors;
  int k = 1;
  Method method = Method::AQ;
  int n_loglik_evals = 0;
  bool converged = false;
  double wall_time = 0.0;
  FitDiagnostics diagnostics;
};

/// beta of the fixed-effects-only model (random effects set to zero) plus
/// unit variances: the default starting point.
Parameters default_start(const GroupedDataset &data, const ModelSpec &spec);

FitResult fit(const GroupedDataset &data, const ModelSpec &spec, int k,
              const FitOptions &options = {});

struct WaldInterval {
  std::string name;
  double estimate; ///< natural scale
  double lower;
  double upper;
};

/// Throws std::invalid_argument when the fit has no standard errors or
/// level is outside (0, 1).
std::vector<WaldInterval> wald_ci(const FitResult &fit, double level = 0.95);

} // namespace aghq
