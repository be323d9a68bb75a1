#include "aghq/inner.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace aghq {

namespace {

double inf_norm(const Eigen::VectorXd &v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

} // namespace

GroupLogJoint::GroupLogJoint(const Group &group, const PreparedModel &model)
    : group_(group), model_(model) {
  if (group_.V.cols() != model_.spec().p)
    throw std::invalid_argument("group '" + group_.id + "': random-effect design has " +
                                std::to_string(group_.V.cols()) + " columns, model has p=" +
                                std::to_string(model_.spec().p));
  if (group_.X.cols() != model_.spec().d)
    throw std::invalid_argument("group '" + group_.id + "': fixed-effect design has " +
                                std::to_string(group_.X.cols()) + " columns, model has d=" +
                                std::to_string(model_.spec().d));
  eta_fixed_ = Eigen::VectorXd::Constant(group_.size(), model_.offset());
  if (model_.spec().d > 0) eta_fixed_.noalias() += group_.X * model_.params().beta;
  intercept_only_ = group_.V.cols() == 1 && (group_.V.array() == 1.0).all();
}

Scalar3 GroupLogJoint::eval1(double u, int order) const {
  Scalar3 out = model_.raneff1(u, order);
  const bool surv = model_.spec().survival();
  const int m = group_.size();
  for (int j = 0; j < m; ++j) {
    const double v = intercept_only_ ? 1.0 : group_.V(j, 0);
    const Scalar3 r =
        model_.response(group_.y(j), surv ? group_.status(j) : 0.0, eta_fixed_(j) + v * u, order);
    out.value += r.value;
    out.d1 += r.d1 * v;
    out.d2 += r.d2 * v * v;
  }
  return out;
}

VectorEval GroupLogJoint::eval(const Eigen::Ref<const Eigen::VectorXd> &u, int order) const {
  if (u.size() != dim())
    throw std::invalid_argument("group '" + group_.id + "': u has dimension " +
                                std::to_string(u.size()) + ", expected " +
                                std::to_string(dim()));
  if (dim() == 1) {
    const Scalar3 s = eval1(u(0), order);
    VectorEval out;
    out.value = s.value;
    if (order >= 1) out.grad = Eigen::VectorXd::Constant(1, s.d1);
    if (order >= 2) out.hess = Eigen::MatrixXd::Constant(1, 1, s.d2);
    return out;
  }
  VectorEval out = model_.raneff(u, order);
  const bool surv = model_.spec().survival();
  const Eigen::VectorXd eta = eta_fixed_ + group_.V * u;
  Eigen::VectorXd d1(group_.size());
  Eigen::VectorXd d2(group_.size());
  for (int j = 0; j < group_.size(); ++j) {
    const Scalar3 r = model_.response(group_.y(j), surv ? group_.status(j) : 0.0, eta(j), order);
    out.value += r.value;
    d1(j) = r.d1;
    d2(j) = r.d2;
  }
  if (order >= 1) out.grad.noalias() += group_.V.transpose() * d1;
  if (order >= 2) out.hess.noalias() += group_.V.transpose() * d2.asDiagonal() * group_.V;
  return out;
}

double GroupLogJoint::value(const Eigen::Ref<const Eigen::VectorXd> &u) const {
  if (dim() == 1) return eval1(u(0), 0).value;
  return eval(u, 0).value;
}

VectorEval group_joint_loglik(const Group &group, const ModelSpec &spec,
                              const Parameters &params, const Eigen::VectorXd &u,
                              int derivative_order) {
  if (group.size() == 0) throw std::invalid_argument("group '" + group.id + "' is empty");
  const PreparedModel model(spec, params);
  return GroupLogJoint(group, model).eval(u, derivative_order);
}

void set_curvature(Adaptation &a, Eigen::MatrixXd neg_hessian, const std::string &label) {
  const int p = static_cast<int>(neg_hessian.rows());
  neg_hessian = 0.5 * (neg_hessian + neg_hessian.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(neg_hessian);
  if (!neg_hessian.allFinite() || llt.info() != Eigen::Success) {
    const double jitter = 1e-8 * (1.0 + neg_hessian.diagonal().cwiseAbs().maxCoeff());
    neg_hessian.diagonal().array() += jitter;
    llt.compute(neg_hessian);
    if (!neg_hessian.allFinite() || llt.info() != Eigen::Success)
      throw ModelError("negative Hessian is not positive definite at the mode", label);
    a.jittered = true;
  }
  const Eigen::MatrixXd R = llt.matrixL();
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::LLT<Eigen::MatrixXd> inv_llt(0.5 * (inv + inv.transpose()));
  if (inv_llt.info() != Eigen::Success)
    throw ModelError("inverse negative Hessian is not positive definite", label);
  a.chol_inv = inv_llt.matrixL();
  a.logdet_L = -R.diagonal().array().log().sum();
  a.neg_hessian = std::move(neg_hessian);
}

Adaptation adapt(const LogIntegrand &f, const AdaptOptions &options) {
  const int p = f.dim();
  const std::string label = f.label();
  Eigen::VectorXd u = options.start ? *options.start : Eigen::VectorXd::Zero(p);
  if (u.size() != p) throw std::invalid_argument("adapt: start has wrong dimension");

  VectorEval cur = f.eval(u, 2);
  if (!std::isfinite(cur.value) || !cur.grad.allFinite())
    throw AdaptError("log-integrand not finite at the starting point", label, u);

  Adaptation a;
  for (int it = 0; it <= options.max_iter; ++it) {
    if (inf_norm(cur.grad) <= options.tol) {
      a.converged = true;
      break;
    }
    if (it == options.max_iter) break;

    Eigen::MatrixXd H = -cur.hess;
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
      // Non-concave region: shift the spectrum until H is PD.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
      const double shift = -es.eigenvalues().minCoeff() +
                           1e-6 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
      H.diagonal().array() += shift;
      llt.compute(H);
    }
    const Eigen::VectorXd step = llt.solve(cur.grad);

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand;
    // Terms of size ~|H| carry rounding noise that can mask a tiny true increase.
    const double floor = cur.value - 1e-13 * (1.0 + std::abs(cur.value)) -
                         64.0 * std::numeric_limits<double>::epsilon() *
                             cur.hess.diagonal().cwiseAbs().maxCoeff();
    for (int h = 0; h <= options.max_halvings; ++h) {
      cand = u + t * step;
      const double val = f.value(cand);
      if (std::isfinite(val) && val >= floor) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) throw AdaptError("Newton line search failed to increase l(u)", label, u);
    u = std::move(cand);
    cur = f.eval(u, 2);
    ++a.iterations;
  }
  if (!a.converged)
    throw AdaptError("mode search did not converge in " + std::to_string(options.max_iter) +
                         " iterations",
                     label, u);

  // One extra Newton step takes a converged iterate to machine precision,
  // which keeps l(u-hat) and H smooth in theta for finite differencing.
  {
    Eigen::LLT<Eigen::MatrixXd> llt(-cur.hess);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd cand = u + llt.solve(cur.grad);
      VectorEval next = f.eval(cand, 2);
      if (std::isfinite(next.value) && next.grad.allFinite() &&
          inf_norm(next.grad) <= inf_norm(cur.grad)) {
        u = cand;
        cur = std::move(next);
      }
    }
  }

  a.mode = u;
  a.mode_value = cur.value;
  set_curvature(a, -cur.hess, label);
  return a;
}

Adaptation adapt(const Group &group, const ModelSpec &spec, const Parameters &params,
                 const AdaptOptions &options) {
  if (group.size() == 0) throw std::invalid_argument("group '" + group.id + "' is empty");
  const PreparedModel model(spec, params);
  return adapt(GroupLogJoint(group, model), options);
}

} // namespace aghq
