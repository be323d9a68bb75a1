#include "aghq/families.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace aghq {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

} // namespace

std::string_view to_string(ResponseFamily f) {
  switch (f) {
  case ResponseFamily::bernoulli_logit: return "bernoulli_logit";
  case ResponseFamily::poisson_log: return "poisson_log";
  case ResponseFamily::gaussian_identity: return "gaussian_identity";
  case ResponseFamily::weibull_ph: return "weibull_ph";
  }
  return "?";
}

std::string_view to_string(RaneffFamily f) {
  switch (f) {
  case RaneffFamily::gaussian: return "gaussian";
  case RaneffFamily::log_gamma_frailty: return "log_gamma_frailty";
  }
  return "?";
}

std::optional<ResponseFamily> parse_response_family(std::string_view name) {
  for (auto f : {ResponseFamily::bernoulli_logit, ResponseFamily::poisson_log,
                 ResponseFamily::gaussian_identity, ResponseFamily::weibull_ph})
    if (to_string(f) == name) return f;
  return std::nullopt;
}

std::optional<RaneffFamily> parse_raneff_family(std::string_view name) {
  for (auto f : {RaneffFamily::gaussian, RaneffFamily::log_gamma_frailty})
    if (to_string(f) == name) return f;
  return std::nullopt;
}

int ModelSpec::response_param_count() const noexcept {
  switch (response) {
  case ResponseFamily::gaussian_identity: return 1;
  case ResponseFamily::weibull_ph: return 2;
  default: return 0;
  }
}

int ModelSpec::raneff_param_count() const noexcept {
  if (raneff == RaneffFamily::log_gamma_frailty) return 1;
  return p * (p + 1) / 2;
}

void ModelSpec::validate() const {
  if (d < 0) throw std::invalid_argument("ModelSpec: d must be >= 0");
  if (p < 1) throw std::invalid_argument("ModelSpec: p must be >= 1");
  if (raneff == RaneffFamily::log_gamma_frailty && p != 1)
    throw std::invalid_argument("ModelSpec: log_gamma_frailty requires p = 1");
}

Parameters Parameters::defaults(const ModelSpec &spec) {
  Parameters out;
  out.beta = Eigen::VectorXd::Zero(spec.d);
  out.response = Eigen::VectorXd::Ones(spec.response_param_count());
  if (spec.raneff == RaneffFamily::gaussian)
    out.raneff = Eigen::MatrixXd::Identity(spec.p, spec.p);
  else
    out.raneff = Eigen::MatrixXd::Ones(1, 1);
  return out;
}

void validate_parameters(const ModelSpec &spec, const Parameters &params) {
  if (params.beta.size() != spec.d)
    throw std::invalid_argument("parameters: beta has " + std::to_string(params.beta.size()) +
                                " entries, model expects " + std::to_string(spec.d));
  if (params.response.size() != spec.response_param_count())
    throw std::invalid_argument("parameters: wrong number of response parameters");
  for (Eigen::Index i = 0; i < params.response.size(); ++i)
    if (!(params.response(i) > 0.0) || !std::isfinite(params.response(i)))
      throw std::invalid_argument("parameters: response dispersion parameters must be positive");
  if (spec.raneff == RaneffFamily::gaussian) {
    if (params.raneff.rows() != spec.p || params.raneff.cols() != spec.p)
      throw std::invalid_argument("parameters: random-effect covariance must be p x p");
    Eigen::LLT<Eigen::MatrixXd> llt(params.raneff);
    if (llt.info() != Eigen::Success || !params.raneff.allFinite())
      throw std::invalid_argument("parameters: random-effect covariance not positive definite");
  } else {
    if (params.raneff.size() != 1 || !(params.raneff(0, 0) > 0.0) ||
        !std::isfinite(params.raneff(0, 0)))
      throw std::invalid_argument("parameters: frailty variance must be a positive scalar");
  }
}

double log1pexp(double x) noexcept {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void check_response(ResponseFamily family, double y, double status) {
  switch (family) {
  case ResponseFamily::bernoulli_logit:
    if (y != 0.0 && y != 1.0)
      throw std::invalid_argument("bernoulli_logit response must be 0 or 1, got " +
                                  std::to_string(y));
    break;
  case ResponseFamily::poisson_log:
    if (!is_integer(y) || y < 0.0)
      throw std::invalid_argument("poisson_log response must be a non-negative integer, got " +
                                  std::to_string(y));
    break;
  case ResponseFamily::gaussian_identity:
    if (!std::isfinite(y))
      throw std::invalid_argument("gaussian_identity response must be finite");
    break;
  case ResponseFamily::weibull_ph:
    if (!(y > 0.0) || !std::isfinite(y))
      throw std::invalid_argument("weibull_ph time must be positive, got " + std::to_string(y));
    if (status != 0.0 && status != 1.0)
      throw std::invalid_argument("weibull_ph status must be 0 or 1, got " +
                                  std::to_string(status));
    break;
  }
}

PreparedModel::PreparedModel(const ModelSpec &spec, const Parameters &params)
    : spec_(spec), params_(params) {
  spec_.validate();
  validate_parameters(spec_, params_);
  switch (spec_.response) {
  case ResponseFamily::gaussian_identity: resid_var_ = params_.response(0); break;
  case ResponseFamily::weibull_ph:
    offset_ = std::log(params_.response(0));
    alpha_ = params_.response(1);
    log_alpha_ = std::log(alpha_);
    break;
  default: break;
  }
  if (spec_.raneff == RaneffFamily::gaussian) {
    sigma_llt_.compute(params_.raneff);
    sigma_inv_ = sigma_llt_.solve(Eigen::MatrixXd::Identity(spec_.p, spec_.p));
    const Eigen::MatrixXd L = sigma_llt_.matrixL();
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    raneff_const_ = -0.5 * (spec_.p * kLog2Pi + logdet);
  } else {
    const double phi = params_.raneff(0, 0);
    inv_phi_ = 1.0 / phi;
    raneff_const_ = -std::lgamma(inv_phi_) - inv_phi_ * std::log(phi);
  }
}

Scalar3 PreparedModel::response(double y, double status, double eta, int order) const noexcept {
  Scalar3 r;
  switch (spec_.response) {
  case ResponseFamily::bernoulli_logit: {
    r.value = y * eta - log1pexp(eta);
    if (order >= 1) {
      const double mu = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                                   : std::exp(eta) / (1.0 + std::exp(eta));
      r.d1 = y - mu;
      if (order >= 2) r.d2 = -mu * (1.0 - mu);
    }
    break;
  }
  case ResponseFamily::poisson_log: {
    const double mu = std::exp(eta);
    r.value = y * eta - mu - std::lgamma(y + 1.0);
    r.d1 = y - mu;
    r.d2 = -mu;
    break;
  }
  case ResponseFamily::gaussian_identity: {
    const double e = y - eta;
    r.value = -0.5 * (kLog2Pi + std::log(resid_var_) + e * e / resid_var_);
    r.d1 = e / resid_var_;
    r.d2 = -1.0 / resid_var_;
    break;
  }
  case ResponseFamily::weibull_ph: {
    const double logt = std::log(y);
    const double cumhaz = std::exp(alpha_ * logt + eta);
    r.value = status * (log_alpha_ + (alpha_ - 1.0) * logt + eta) - cumhaz;
    r.d1 = status - cumhaz;
    r.d2 = -cumhaz;
    break;
  }
  }
  return r;
}

Scalar3 PreparedModel::raneff1(double u, int order) const noexcept {
  Scalar3 r;
  if (spec_.raneff == RaneffFamily::gaussian) {
    const double prec = sigma_inv_(0, 0);
    r.value = raneff_const_ - 0.5 * prec * u * u;
    r.d1 = -prec * u;
    r.d2 = -prec;
  } else {
    const double eu = std::exp(u);
    r.value = raneff_const_ + inv_phi_ * (u - eu);
    r.d1 = inv_phi_ * (1.0 - eu);
    r.d2 = -inv_phi_ * eu;
  }
  (void)order;
  return r;
}

VectorEval PreparedModel::raneff(const Eigen::Ref<const Eigen::VectorXd> &u, int order) const {
  VectorEval r;
  if (spec_.raneff == RaneffFamily::gaussian) {
    const Eigen::VectorXd su = sigma_inv_ * u;
    r.value = raneff_const_ - 0.5 * u.dot(su);
    if (order >= 1) r.grad = -su;
    if (order >= 2) r.hess = -sigma_inv_;
  } else {
    const Scalar3 s = raneff1(u(0), order);
    r.value = s.value;
    if (order >= 1) r.grad = Eigen::VectorXd::Constant(1, s.d1);
    if (order >= 2) r.hess = Eigen::MatrixXd::Constant(1, 1, s.d2);
  }
  return r;
}

Scalar3 response_logdensity(const ModelSpec &spec, double y, double status, double eta,
                            const Parameters &params, int derivative_order) {
  check_response(spec.response, y, status);
  if (!std::isfinite(eta)) throw std::invalid_argument("response_logdensity: eta not finite");
  return PreparedModel(spec, params).response(y, status, eta, derivative_order);
}

VectorEval raneff_logdensity(const ModelSpec &spec, const Eigen::VectorXd &u,
                             const Parameters &params, int derivative_order) {
  if (u.size() != spec.p)
    throw std::invalid_argument("raneff_logdensity: u has wrong dimension");
  return PreparedModel(spec, params).raneff(u, derivative_order);
}

// --- transforms -------------------------------------------------------------

double positive_to_real(double x, PositiveTransform t) {
  if (t == PositiveTransform::log) return std::log(x);
  // inverse softplus: log(e^x - 1)
  return x > 30.0 ? x + std::log(-std::expm1(-x)) : std::log(std::expm1(x));
}

double real_to_positive(double y, PositiveTransform t) {
  if (t == PositiveTransform::log) return std::exp(y);
  return log1pexp(y);
}

Eigen::VectorXd to_unconstrained(const ModelSpec &spec, const Parameters &params,
                                 PositiveTransform t) {
  validate_parameters(spec, params);
  Eigen::VectorXd theta(spec.n_params());
  Eigen::Index pos = 0;
  theta.head(spec.d) = params.beta;
  pos += spec.d;
  for (Eigen::Index i = 0; i < params.response.size(); ++i)
    theta(pos++) = positive_to_real(params.response(i), t);
  if (spec.raneff == RaneffFamily::log_gamma_frailty || spec.p == 1) {
    theta(pos++) = positive_to_real(params.raneff(0, 0), t);
  } else {
    const Eigen::MatrixXd L = params.raneff.llt().matrixL();
    for (int j = 0; j < spec.p; ++j)
      for (int i = j; i < spec.p; ++i)
        theta(pos++) = (i == j) ? positive_to_real(L(i, i), t) : L(i, j);
  }
  return theta;
}

Parameters from_unconstrained(const ModelSpec &spec, const Eigen::VectorXd &theta,
                              PositiveTransform t) {
  if (theta.size() != spec.n_params())
    throw std::invalid_argument("from_unconstrained: expected " +
                                std::to_string(spec.n_params()) + " parameters");
  Parameters out;
  Eigen::Index pos = 0;
  out.beta = theta.head(spec.d);
  pos += spec.d;
  out.response.resize(spec.response_param_count());
  for (Eigen::Index i = 0; i < out.response.size(); ++i)
    out.response(i) = real_to_positive(theta(pos++), t);
  if (spec.raneff == RaneffFamily::log_gamma_frailty || spec.p == 1) {
    out.raneff = Eigen::MatrixXd::Constant(1, 1, real_to_positive(theta(pos++), t));
  } else {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(spec.p, spec.p);
    for (int j = 0; j < spec.p; ++j)
      for (int i = j; i < spec.p; ++i)
        L(i, j) = (i == j) ? real_to_positive(theta(pos++), t) : theta(pos++);
    out.raneff = L * L.transpose();
  }
  return out;
}

std::vector<std::string> parameter_names(const ModelSpec &spec,
                                         const std::vector<std::string> &beta_names) {
  std::vector<std::string> names;
  for (int j = 0; j < spec.d; ++j)
    names.push_back(j < static_cast<int>(beta_names.size()) ? beta_names[j]
                                                            : "beta" + std::to_string(j));
  if (spec.response == ResponseFamily::gaussian_identity) names.emplace_back("resid_var");
  if (spec.response == ResponseFamily::weibull_ph) {
    names.emplace_back("mu");
    names.emplace_back("alpha");
  }
  if (spec.raneff == RaneffFamily::log_gamma_frailty || spec.p == 1) {
    names.emplace_back("sigma2");
  } else {
    for (int j = 0; j < spec.p; ++j)
      for (int i = j; i < spec.p; ++i)
        names.push_back("L[" + std::to_string(i) + "," + std::to_string(j) + "]");
  }
  return names;
}

std::vector<bool> log_scale_mask(const ModelSpec &spec) {
  std::vector<bool> mask(spec.n_params(), false);
  int pos = spec.d;
  for (int i = 0; i < spec.response_param_count(); ++i) mask[pos++] = true;
  if (spec.raneff == RaneffFamily::log_gamma_frailty || spec.p == 1) mask[pos] = true;
  return mask;
}

} // namespace aghq
