#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "aghq/data.hpp"
#include "aghq/error.hpp"
#include "aghq/families.hpp"

namespace aghq {

/// A log-integrand u -> l(u) on R^p with derivatives up to second order.
class LogIntegrand {
public:
  virtual ~LogIntegrand() = default;
  virtual int dim() const = 0;
  virtual VectorEval eval(const Eigen::Ref<const Eigen::VectorXd> &u, int order) const = 0;
  /// Value only; overridden where a cheaper path exists.
  virtual double value(const Eigen::Ref<const Eigen::VectorXd> &u) const {
    return eval(u, 0).value;
  }
  virtual std::string label() const { return {}; }
};

/**
 * l_i(y_i, u; theta) = sum_j log f(y_ij | x_ij'beta + v_ij'u) + log g(u).
 *
 * Holds references to the group and the prepared model; both must outlive it.
 */
class GroupLogJoint final : public LogIntegrand {
public:
  GroupLogJoint(const Group &group, const PreparedModel &model);

  int dim() const override { return static_cast<int>(group_.V.cols()); }
  VectorEval eval(const Eigen::Ref<const Eigen::VectorXd> &u, int order) const override;
  double value(const Eigen::Ref<const Eigen::VectorXd> &u) const override;
  std::string label() const override { return group_.id; }

  /// Scalar path for p = 1.
  Scalar3 eval1(double u, int order) const;

private:
  const Group &group_;
  const PreparedModel &model_;
  Eigen::VectorXd eta_fixed_; // X beta + offset
  bool intercept_only_ = false;
};

/// Wraps a callable as a LogIntegrand (handy for closed-form integrands).
class FunctionLogIntegrand final : public LogIntegrand {
public:
  using Fn = std::function<VectorEval(const Eigen::VectorXd &, int)>;
  FunctionLogIntegrand(int dim, Fn fn, std::string label = {})
      : dim_(dim), fn_(std::move(fn)), label_(std::move(label)) {}
  int dim() const override { return dim_; }
  VectorEval eval(const Eigen::Ref<const Eigen::VectorXd> &u, int order) const override {
    return fn_(Eigen::VectorXd(u), order);
  }
  std::string label() const override { return label_; }

private:
  int dim_;
  Fn fn_;
  std::string label_;
};

/// Joint log-likelihood of one group at u with derivatives in u.
VectorEval group_joint_loglik(const Group &group, const ModelSpec &spec,
                              const Parameters &params, const Eigen::VectorXd &u,
                              int derivative_order);

/// Mode, curvature and scaling of one group's integrand.
struct Adaptation {
  Eigen::VectorXd mode;        ///< u-hat
  Eigen::MatrixXd neg_hessian; ///< H = -d2 l / du2 at the mode
  Eigen::MatrixXd chol_inv;    ///< lower L with L L' = H^-1
  double logdet_L = 0.0;       ///< log|L| = -0.5 log det H
  double mode_value = 0.0;     ///< l(u-hat)
  bool converged = false;
  bool jittered = false;
  int iterations = 0;
};

struct AdaptOptions {
  double tol = 1e-8; ///< on the infinity norm of the gradient
  int max_iter = 50;
  int max_halvings = 30;
  std::optional<Eigen::VectorXd> start;
};

/// Raised when Newton ascent fails; carries the last iterate.
class AdaptError : public ModelError {
public:
  AdaptError(const std::string &what, std::string group, Eigen::VectorXd last)
      : ModelError(what, std::move(group)), last_iterate(std::move(last)) {}
  Eigen::VectorXd last_iterate;
};

/// Damped Newton ascent to the mode of `f`, then H, L and log|L| there.
Adaptation adapt(const LogIntegrand &f, const AdaptOptions &options = {});

Adaptation adapt(const Group &group, const ModelSpec &spec, const Parameters &params,
                 const AdaptOptions &options = {});

/// Builds the Adaptation fields that depend only on H (L, log|L|).
/// Applies a single diagonal jitter when H is not positive definite.
void set_curvature(Adaptation &a, Eigen::MatrixXd neg_hessian, const std::string &label);

} // namespace aghq
