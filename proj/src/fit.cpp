#include "aghq/fit.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <gsl/gsl_cdf.h>

#include "aghq/error.hpp"
#include "aghq/optim.hpp"

namespace aghq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Parameters with_fixed_part(const ModelSpec &spec, const Eigen::VectorXd &head,
                           PositiveTransform t) {
  Eigen::VectorXd full = to_unconstrained(spec, Parameters::defaults(spec), t);
  full.head(head.size()) = head;
  return from_unconstrained(spec, full, t);
}

} // namespace

Parameters default_start(const GroupedDataset &data, const ModelSpec &spec) {
  check_compatible(data, spec);
  const int nfixed = spec.d + spec.response_param_count();
  Parameters start = Parameters::defaults(spec);
  if (nfixed == 0) return start;

  const Objective glm = [&](const Eigen::VectorXd &head) {
    Parameters p;
    try {
      p = with_fixed_part(spec, head, PositiveTransform::log);
    } catch (const std::invalid_argument &) {
      return kNegInf;
    }
    const PreparedModel model(spec, p);
    double total = 0.0;
    for (const Group &g : data.groups()) {
      Eigen::VectorXd eta = Eigen::VectorXd::Constant(g.size(), model.offset());
      if (spec.d > 0) eta += g.X * p.beta;
      for (int j = 0; j < g.size(); ++j)
        total += model.response(g.y(j), spec.survival() ? g.status(j) : 0.0, eta(j), 0).value;
    }
    return std::isfinite(total) ? total : kNegInf;
  };
  OptimOptions opt;
  opt.grad_tol = 1e-6;
  opt.max_evals = 5000;
  const OptimResult r =
      maximize(glm, to_unconstrained(spec, start).head(nfixed), opt);
  if (!std::isfinite(r.value)) return start;
  return with_fixed_part(spec, r.x, PositiveTransform::log);
}

FitResult fit(const GroupedDataset &data, const ModelSpec &spec, int k,
              const FitOptions &options) {
  const auto t0 = std::chrono::steady_clock::now();
  check_compatible(data, spec);
  if (k < 1) throw std::invalid_argument("k must be at least 1");

  MarginalLikelihood ml(data, spec, k, options.method, options.adapt);
  FitResult res;
  res.k = k;
  res.method = options.method;
  res.names = parameter_names(spec, data.fixed_names());
  res.log_scale = log_scale_mask(spec);
  FitDiagnostics &diag = res.diagnostics;

  auto loglik_on = [&](PositiveTransform t, int &counter) {
    return [&, t](const Eigen::VectorXd &theta) {
      ++counter;
      try {
        const LoglikBreakdown b = ml.evaluate(from_unconstrained(spec, theta, t));
        diag.jitter_count += b.jitter_count;
        if (std::isfinite(b.total)) return b.total;
      } catch (const ModelError &) {
      } catch (const std::invalid_argument &) {
      }
      ++diag.failed_evaluations;
      return kNegInf;
    };
  };

  const Parameters start = options.start ? *options.start : default_start(data, spec);
  validate_parameters(spec, start);

  int search_evals = 0;
  OptimOptions opt;
  opt.grad_tol = options.outer_tol;
  opt.max_evals = options.max_evals;
  const OptimResult r = maximize(loglik_on(options.transform, search_evals),
                                 to_unconstrained(spec, start, options.transform), opt);

  res.params_hat = from_unconstrained(spec, r.x, options.transform);
  res.estimates = to_unconstrained(spec, res.params_hat, PositiveTransform::log);
  res.loglik = r.value;
  res.converged = r.converged;
  res.n_loglik_evals = search_evals;
  diag.optimizer_iterations = r.iterations;
  diag.simplex_used = r.used_simplex;
  diag.grad_inf_norm = r.grad.size() ? r.grad.cwiseAbs().maxCoeff() : 0.0;
  diag.message = r.message;

  res.std_errors = Eigen::VectorXd::Constant(res.estimates.size(),
                                             std::numeric_limits<double>::quiet_NaN());
  if (options.compute_vcov && std::isfinite(res.loglik)) {
    res.vcov = vcov_from_hessian(loglik_on(PositiveTransform::log, diag.hessian_evals),
                                 res.estimates);
    if (res.vcov)
      res.std_errors = res.vcov->diagonal().cwiseMax(0.0).cwiseSqrt();
    else
      diag.message += "; observed information not positive definite, standard errors missing";
  }
  diag.inner_iterations = ml.inner_iterations();
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::vector<WaldInterval> wald_ci(const FitResult &fit, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0, 1)");
  if (!fit.vcov || !fit.std_errors.allFinite())
    throw std::invalid_argument("fit has no standard errors");
  const double z = gsl_cdf_ugaussian_Pinv(0.5 + 0.5 * level);
  std::vector<WaldInterval> out;
  for (Eigen::Index i = 0; i < fit.estimates.size(); ++i) {
    const double e = fit.estimates(i);
    const double se = fit.std_errors(i);
    WaldInterval w{fit.names[i], e, e - z * se, e + z * se};
    if (fit.log_scale[i]) {
      w.estimate = std::exp(w.estimate);
      w.lower = std::exp(w.lower);
      w.upper = std::exp(w.upper);
    }
    out.push_back(w);
  }
  return out;
}

} // namespace aghq
