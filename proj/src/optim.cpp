#include "aghq/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "aghq/error.hpp"

namespace aghq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Wraps the objective: counts calls, maps failures to -inf, tracks the best point.
class Counted {
public:
  Counted(const Objective &f, int budget) : f_(f), budget_(budget) {}

  double operator()(const Eigen::VectorXd &x) {
    ++calls_;
    double v;
    try {
      v = f_(x);
    } catch (const ModelError &) {
      v = -kInf;
    }
    if (std::isnan(v)) v = -kInf;
    if (v > best_value_) {
      best_value_ = v;
      best_x_ = x;
    }
    return v;
  }

  bool exhausted() const { return calls_ >= budget_; }
  int calls() const { return calls_; }
  double best_value() const { return best_value_; }
  const Eigen::VectorXd &best_x() const { return best_x_; }

private:
  const Objective &f_;
  int budget_;
  int calls_ = 0;
  double best_value_ = -kInf;
  Eigen::VectorXd best_x_;
};

Eigen::VectorXd gradient(Counted &f, const Eigen::VectorXd &x) {
  const double c = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = c * (1.0 + std::abs(x(j)));
    xp(j) = x(j) + h;
    const double up = f(xp);
    xp(j) = x(j) - h;
    const double dn = f(xp);
    xp(j) = x(j);
    g(j) = (up - dn) / (2.0 * h);
  }
  return g;
}

struct BfgsOutcome {
  Eigen::VectorXd x, grad;
  double value;
  bool converged;
  int iterations;
};

// Quasi-Newton ascent. Stops on convergence, a stalled line search or budget.
BfgsOutcome bfgs(Counted &f, Eigen::VectorXd x, const OptimOptions &opt) {
  const Eigen::Index n = x.size();
  double fx = f(x);
  BfgsOutcome out{x, Eigen::VectorXd::Zero(n), fx, false, 0};
  if (!std::isfinite(fx)) return out;
  Eigen::VectorXd g = gradient(f, x);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n); // inverse Hessian of -f
  bool scaled = false;
  int it = 0;
  while (g.allFinite() && g.cwiseAbs().maxCoeff() > opt.grad_tol && !f.exhausted()) {
    ++it;
    Eigen::VectorXd d = B * g;
    if (d.dot(g) <= 0.0) {
      B.setIdentity();
      d = g;
    }
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > opt.max_step) d *= opt.max_step / dmax;
    const double slope = d.dot(g);
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd xn;
    double fn = -kInf;
    for (int h = 0; h < 40 && !f.exhausted(); ++h, t *= 0.5) {
      xn = x + t * d;
      fn = f(xn);
      if (std::isfinite(fn) && fn >= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const Eigen::VectorXd gn = gradient(f, xn);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = g - gn; // gradient change of -f
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (!scaled) {
        B *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      B = (I - rho * s * y.transpose()) * B * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  out.x = x;
  out.value = fx;
  out.grad = g;
  out.converged = g.allFinite() && g.cwiseAbs().maxCoeff() <= opt.grad_tol;
  out.iterations = it;
  return out;
}

struct SimplexContext {
  Counted *f;
};

double simplex_objective(const gsl_vector *v, void *params) {
  auto *ctx = static_cast<SimplexContext *>(params);
  Eigen::VectorXd x(v->size);
  for (std::size_t i = 0; i < v->size; ++i) x(i) = gsl_vector_get(v, i);
  const double val = (*ctx->f)(x);
  // nmsimplex2 rejects non-finite values; a huge penalty keeps it away instead.
  return std::isfinite(val) ? -val : 1e300;
}

Eigen::VectorXd simplex(Counted &f, const Eigen::VectorXd &x0) {
  const auto n = static_cast<std::size_t>(x0.size());
  SimplexContext ctx{&f};
  gsl_multimin_function fn{&simplex_objective, n, &ctx};
  gsl_vector *x = gsl_vector_alloc(n);
  gsl_vector *step = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0(i));
    gsl_vector_set(step, i, 0.1 * (1.0 + std::abs(x0(i))));
  }
  gsl_multimin_fminimizer *s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  for (int iter = 0; iter < 5000 && !f.exhausted(); ++iter) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-8) == GSL_SUCCESS) break;
  }
  Eigen::VectorXd out(n);
  const gsl_vector *best = gsl_multimin_fminimizer_x(s);
  for (std::size_t i = 0; i < n; ++i) out(i) = gsl_vector_get(best, i);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return out;
}

} // namespace

Eigen::VectorXd fd_gradient(const Objective &f, const Eigen::VectorXd &x) {
  Counted c(f, std::numeric_limits<int>::max());
  return gradient(c, x);
}

Eigen::MatrixXd fd_hessian(const Objective &f, const Eigen::VectorXd &x) {
  const Eigen::Index n = x.size();
  const double c = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  Eigen::VectorXd h(n);
  for (Eigen::Index j = 0; j < n; ++j) h(j) = c * (1.0 + std::abs(x(j)));
  const double f0 = f(x);
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp(i) = x(i) + h(i);
    const double up = f(xp);
    xp(i) = x(i) - h(i);
    const double dn = f(xp);
    xp(i) = x(i);
    H(i, i) = (up - 2.0 * f0 + dn) / (h(i) * h(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      double s = 0.0;
      for (int a : {1, -1})
        for (int b : {1, -1}) {
          xp(i) = x(i) + a * h(i);
          xp(j) = x(j) + b * h(j);
          s += a * b * f(xp);
        }
      xp(i) = x(i);
      xp(j) = x(j);
      H(i, j) = H(j, i) = s / (4.0 * h(i) * h(j));
    }
  }
  return H;
}

OptimResult maximize(const Objective &f, const Eigen::VectorXd &x0, const OptimOptions &options) {
  gsl_set_error_handler_off();
  Counted counted(f, options.max_evals);
  OptimResult r;
  BfgsOutcome b = bfgs(counted, x0, options);
  r.iterations = b.iterations;
  if (!b.converged && std::isfinite(b.value) && !counted.exhausted()) {
    r.used_simplex = true;
    const Eigen::VectorXd xs = simplex(counted, counted.best_x());
    BfgsOutcome again = bfgs(counted, xs, options);
    r.iterations += again.iterations;
    if (again.converged || again.value >= b.value) b = again;
  }
  r.x = b.x;
  r.value = b.value;
  r.grad = b.grad;
  r.converged = b.converged;
  if (!r.converged && counted.best_value() > r.value) {
    // Return the best point seen, with a gradient to match.
    r.x = counted.best_x();
    r.value = counted.best_value();
    r.grad = gradient(counted, r.x);
  }
  r.n_evals = counted.calls();
  if (r.converged)
    r.message = "converged";
  else if (!std::isfinite(r.value))
    r.message = "objective is not finite at the start point";
  else if (counted.exhausted())
    r.message = "evaluation budget exhausted";
  else
    r.message = "line search stalled";
  return r;
}

std::optional<Eigen::MatrixXd> vcov_from_hessian(const Objective &loglik,
                                                 const Eigen::VectorXd &at) {
  const Eigen::MatrixXd H = fd_hessian(loglik, at);
  if (!H.allFinite()) return std::nullopt;
  // Curvature below the rounding noise of the difference quotients is zero.
  const double c = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  const double hmin = c * (1.0 + at.cwiseAbs().minCoeff());
  const double noise = 10.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, std::abs(loglik(at))) / (hmin * hmin);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-0.5 * (H + H.transpose()));
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= noise) return std::nullopt;
  const Eigen::VectorXd inv = eig.eigenvalues().cwiseInverse();
  Eigen::MatrixXd V = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  V = 0.5 * (V + V.transpose());
  if (!V.allFinite()) return std::nullopt;
  return V;
}

} // namespace aghq
