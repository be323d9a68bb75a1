#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "aghq/data.hpp"
#include "aghq/families.hpp"
#include "aghq/inner.hpp"
#include "aghq/quadrature.hpp"

namespace aghq {

enum class Method { AQ, GQ };

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view name);

/// log of |L| sum_z exp(l(L z + u-hat)) omega(z), evaluated by log-sum-exp.
double aq_log_integral(const LogIntegrand &f, const QuadratureRule &rule,
                       const Adaptation &adaptation);

/// log of sum_z exp(l(z)) omega(z) on the unadapted nodes.
double gq_log_integral(const LogIntegrand &f, const QuadratureRule &rule);

double aq_group_loglik(const Group &group, const ModelSpec &spec, const Parameters &params,
                       const QuadratureRule &rule, const Adaptation &adaptation);
double gq_group_loglik(const Group &group, const ModelSpec &spec, const Parameters &params,
                       const QuadratureRule &rule);

struct LoglikBreakdown {
  std::vector<double> per_group;
  double total = 0.0;
  Method method = Method::AQ;
  int k = 1;
  std::vector<Adaptation> adaptations; ///< AQ only
  int jitter_count = 0;
};

/**
 * Approximate marginal log-likelihood of a dataset at fixed k.
 *
 * Keeps the previous call's modes as warm starts for the next AQ
 * evaluation, so repeated calls at nearby parameters (as an optimizer
 * makes) need few Newton steps. Not safe for concurrent evaluate() calls
 * on one instance.
 */
class MarginalLikelihood {
public:
  MarginalLikelihood(const GroupedDataset &data, const ModelSpec &spec, int k, Method method,
                     AdaptOptions adapt_options = {});

  LoglikBreakdown evaluate(const Parameters &params);
  double operator()(const Parameters &params) { return evaluate(params).total; }

  const QuadratureRule &rule() const noexcept { return rule_; }
  const ModelSpec &spec() const noexcept { return spec_; }
  const GroupedDataset &data() const noexcept { return data_; }
  int k() const noexcept { return rule_.order(); }
  Method method() const noexcept { return method_; }

  /// Forget warm starts; the next evaluation starts every mode search at 0.
  void reset_warm_starts() { warm_.clear(); }
  long inner_iterations() const noexcept { return inner_iterations_; }

private:
  const GroupedDataset &data_;
  ModelSpec spec_;
  QuadratureRule rule_;
  Method method_;
  AdaptOptions adapt_options_;
  std::vector<Eigen::VectorXd> warm_;
  long inner_iterations_ = 0;
};

/// One-shot evaluation without warm starts.
LoglikBreakdown total_loglik(const GroupedDataset &data, const ModelSpec &spec,
                             const Parameters &params, int k, Method method);

} // namespace aghq
