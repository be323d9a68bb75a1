#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace aghq {

enum class ResponseFamily { bernoulli_logit, poisson_log, gaussian_identity, weibull_ph };
enum class RaneffFamily { gaussian, log_gamma_frailty };

/// Map from a strictly positive natural parameter to the real line.
enum class PositiveTransform { log, softplus };

std::string_view to_string(ResponseFamily f);
std::string_view to_string(RaneffFamily f);
std::optional<ResponseFamily> parse_response_family(std::string_view name);
std::optional<RaneffFamily> parse_raneff_family(std::string_view name);

/**
 * Response family, random-effects family and dimensions of a GLMM.
 *
 * The link is implied by the family. Dispersion parameters (s of them):
 *   gaussian_identity  residual variance
 *   weibull_ph         baseline mu and shape alpha, hazard
 *                      alpha t^(alpha-1) exp(log mu + x'beta + v'u)
 *   gaussian raneff    covariance Sigma, p(p+1)/2 free entries
 *   log_gamma_frailty  frailty variance phi (p must be 1)
 */
struct ModelSpec {
  ResponseFamily response = ResponseFamily::bernoulli_logit;
  RaneffFamily raneff = RaneffFamily::gaussian;
  int d = 0;
  int p = 1;

  int response_param_count() const noexcept;
  int raneff_param_count() const noexcept;
  int s() const noexcept { return response_param_count() + raneff_param_count(); }
  int n_params() const noexcept { return d + s(); }
  bool survival() const noexcept { return response == ResponseFamily::weibull_ph; }

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

/// Natural-scale parameters theta = (beta, sigma).
struct Parameters {
  Eigen::VectorXd beta;
  /// gaussian_identity: {residual variance}; weibull_ph: {mu, alpha}; else empty.
  Eigen::VectorXd response;
  /// gaussian: covariance (p x p); log_gamma_frailty: 1x1 frailty variance.
  Eigen::MatrixXd raneff;

  /// Unit variances, zero beta, mu = alpha = 1.
  static Parameters defaults(const ModelSpec &spec);
};

/// Throws std::invalid_argument when sizes disagree with spec or a
/// variance-type parameter is not strictly positive / PD.
void validate_parameters(const ModelSpec &spec, const Parameters &params);

/// Value and first two derivatives of a scalar function.
struct Scalar3 {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Value, gradient and Hessian of a function on R^p.
struct VectorEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

/// log(1 + e^x) without overflow.
double log1pexp(double x) noexcept;

/// Validates y (and status for survival) for the family; throws
/// std::invalid_argument naming the bad value.
void check_response(ResponseFamily family, double y, double status);

/**
 * Model with parameter-dependent constants (log mu, log alpha, Cholesky of
 * Sigma, lgamma(1/phi)) precomputed. Cheap to evaluate many times at fixed
 * parameters.
 */
class PreparedModel {
public:
  PreparedModel(const ModelSpec &spec, const Parameters &params);

  const ModelSpec &spec() const noexcept { return spec_; }
  const Parameters &params() const noexcept { return params_; }

  /// Additive constant in the linear predictor (log mu for weibull_ph).
  double offset() const noexcept { return offset_; }

  /// log f(y | eta) and derivatives in eta. `order` in {0, 1, 2}.
  /// Responses are assumed to have passed check_response.
  Scalar3 response(double y, double status, double eta, int order) const noexcept;

  /// log g(u) and derivatives in u.
  VectorEval raneff(const Eigen::Ref<const Eigen::VectorXd> &u, int order) const;

  /// Scalar fast path for p = 1.
  Scalar3 raneff1(double u, int order) const noexcept;

private:
  ModelSpec spec_;
  Parameters params_;
  double offset_ = 0.0;
  // response
  double resid_var_ = 1.0;
  double alpha_ = 1.0;
  double log_alpha_ = 0.0;
  // raneff
  Eigen::LLT<Eigen::MatrixXd> sigma_llt_;
  Eigen::MatrixXd sigma_inv_;
  double raneff_const_ = 0.0;
  double inv_phi_ = 1.0;
};

/// Response log-density with derivatives in eta. For weibull_ph eta must
/// already include log mu. Validates y.
Scalar3 response_logdensity(const ModelSpec &spec, double y, double status, double eta,
                            const Parameters &params, int derivative_order);

/// Random-effect log-density with derivatives in u.
VectorEval raneff_logdensity(const ModelSpec &spec, const Eigen::VectorXd &u,
                             const Parameters &params, int derivative_order);

// --- parameter transforms ------------------------------------------------

/**
 * Unconstrained vector layout: [beta (d) | response params | raneff params].
 * Positive scalars pass through `t`; a p > 1 covariance uses log-Cholesky
 * (column-major lower triangle, diagonal through `t`).
 */
Eigen::VectorXd to_unconstrained(const ModelSpec &spec, const Parameters &params,
                                 PositiveTransform t = PositiveTransform::log);
Parameters from_unconstrained(const ModelSpec &spec, const Eigen::VectorXd &theta,
                              PositiveTransform t = PositiveTransform::log);

/// Names of the unconstrained coordinates, given names for beta.
std::vector<std::string> parameter_names(const ModelSpec &spec,
                                         const std::vector<std::string> &beta_names);

/// True for coordinates that are the log of a positive scalar parameter
/// under PositiveTransform::log (their Wald intervals are exponentiated).
std::vector<bool> log_scale_mask(const ModelSpec &spec);

double positive_to_real(double x, PositiveTransform t);
double real_to_positive(double y, PositiveTransform t);

} // namespace aghq
