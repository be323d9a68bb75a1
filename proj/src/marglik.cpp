#include "aghq/marglik.hpp"

#include <cmath>
#include <string>

#include "aghq/error.hpp"
#include "aghq/numeric.hpp"
#include "aghq/parallel.hpp"

namespace aghq {

std::string_view to_string(Method m) { return m == Method::AQ ? "aq" : "gq"; }

std::optional<Method> parse_method(std::string_view name) {
  if (name == "aq" || name == "AQ") return Method::AQ;
  if (name == "gq" || name == "GQ") return Method::GQ;
  return std::nullopt;
}

namespace {

void check_rule(const LogIntegrand &f, const QuadratureRule &rule) {
  if (rule.dim() != f.dim())
    throw std::invalid_argument("quadrature rule has dimension " + std::to_string(rule.dim()) +
                                ", integrand has " + std::to_string(f.dim()));
}

[[noreturn]] void nan_node(const LogIntegrand &f, std::size_t node) {
  throw ModelError("log-integrand is NaN at quadrature node " + std::to_string(node), f.label());
}

} // namespace

double aq_log_integral(const LogIntegrand &f, const QuadratureRule &rule,
                       const Adaptation &adaptation) {
  check_rule(f, rule);
  std::vector<double> terms(rule.size());
  Eigen::VectorXd u(f.dim());
  for (std::size_t i = 0; i < rule.size(); ++i) {
    u.noalias() = adaptation.mode + adaptation.chol_inv * rule.point(i);
    const double l = f.value(u);
    if (std::isnan(l)) nan_node(f, i);
    terms[i] = l + rule.log_adapted_weight(i);
  }
  return adaptation.logdet_L + log_sum_exp(terms);
}

double gq_log_integral(const LogIntegrand &f, const QuadratureRule &rule) {
  check_rule(f, rule);
  std::vector<double> terms(rule.size());
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double l = f.value(rule.point(i));
    if (std::isnan(l)) nan_node(f, i);
    terms[i] = l + rule.log_adapted_weight(i);
  }
  return log_sum_exp(terms);
}

double aq_group_loglik(const Group &group, const ModelSpec &spec, const Parameters &params,
                       const QuadratureRule &rule, const Adaptation &adaptation) {
  const PreparedModel model(spec, params);
  return aq_log_integral(GroupLogJoint(group, model), rule, adaptation);
}

double gq_group_loglik(const Group &group, const ModelSpec &spec, const Parameters &params,
                       const QuadratureRule &rule) {
  const PreparedModel model(spec, params);
  return gq_log_integral(GroupLogJoint(group, model), rule);
}

MarginalLikelihood::MarginalLikelihood(const GroupedDataset &data, const ModelSpec &spec, int k,
                                       Method method, AdaptOptions adapt_options)
    : data_(data), spec_(spec), rule_(gauss_hermite(k, spec.p)), method_(method),
      adapt_options_(std::move(adapt_options)) {
  check_compatible(data_, spec_);
}

LoglikBreakdown MarginalLikelihood::evaluate(const Parameters &params) {
  const PreparedModel model(spec_, params);
  const std::size_t M = data_.M();

  LoglikBreakdown out;
  out.method = method_;
  out.k = rule_.order();
  out.per_group.assign(M, 0.0);
  if (method_ == Method::AQ) out.adaptations.resize(M);
  if (warm_.size() != M) warm_.assign(M, Eigen::VectorXd());

  parallel_for(M, [&](std::size_t i) {
    const Group &g = data_.groups()[i];
    const GroupLogJoint f(g, model);
    if (method_ == Method::GQ) {
      out.per_group[i] = gq_log_integral(f, rule_);
      return;
    }
    AdaptOptions opts = adapt_options_;
    Adaptation a;
    if (warm_[i].size() == spec_.p) {
      opts.start = warm_[i];
      try {
        a = adapt(f, opts);
      } catch (const AdaptError &) {
        opts.start.reset();
        a = adapt(f, opts);
      }
    } else {
      a = adapt(f, opts);
    }
    out.per_group[i] = aq_log_integral(f, rule_, a);
    out.adaptations[i] = std::move(a);
  });

  for (std::size_t i = 0; i < M; ++i) {
    out.total += out.per_group[i];
    if (method_ == Method::AQ) {
      warm_[i] = out.adaptations[i].mode;
      inner_iterations_ += out.adaptations[i].iterations;
      out.jitter_count += out.adaptations[i].jittered ? 1 : 0;
    }
  }
  return out;
}

LoglikBreakdown total_loglik(const GroupedDataset &data, const ModelSpec &spec,
                             const Parameters &params, int k, Method method) {
  MarginalLikelihood ml(data, spec, k, method);
  return ml.evaluate(params);
}

} // namespace aghq
