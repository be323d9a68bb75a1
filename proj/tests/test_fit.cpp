#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "aghq/fit.hpp"
#include "aghq/optim.hpp"
#include "test_util.hpp"

using namespace aghq;

namespace {

GroupedDataset make_dataset(std::vector<Group> groups, std::vector<std::string> fixed) {
  return GroupedDataset(std::move(groups), std::move(fixed), {"1"}, {"y"});
}

// Balanced random-intercept LMM, intercept only.
GroupedDataset balanced_lmm(int M, int m, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<Group> gs;
  for (int i = 0; i < M; ++i) {
    Group g = testutil::intercept_group(std::vector<double>(m, 0.0), {}, "g" + std::to_string(i));
    g.X = Eigen::MatrixXd::Ones(m, 1);
    const double u = 1.2 * z(rng);
    for (int j = 0; j < m; ++j) g.y(j) = 1.0 + u + 0.8 * z(rng);
    gs.push_back(std::move(g));
  }
  return make_dataset(std::move(gs), {"1"});
}

GroupedDataset bernoulli_data(int M, int m, double b0, double b1, double sigma, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<Group> gs;
  for (int i = 0; i < M; ++i)
    gs.push_back(testutil::bernoulli_group(rng, m, b0, b1, sigma, "g" + std::to_string(i)));
  return make_dataset(std::move(gs), {"1", "x"});
}

} // namespace

TEST_CASE("maximize") {
  SUBCASE("Rosenbrock") {
    const Objective f = [](const Eigen::VectorXd &x) {
      return -(100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2));
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    auto r = maximize(f, x0);
    CHECK(r.converged);
    CHECK(std::abs(r.x(0) - 1.0) <= 1e-4);
    CHECK(std::abs(r.x(1) - 1.0) <= 1e-4);
    CHECK(r.grad.cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("undefined region is avoided") {
    const Objective f = [](const Eigen::VectorXd &x) {
      return x(0) <= 0.0 ? -std::numeric_limits<double>::infinity() : std::log(x(0)) - x(0);
    };
    auto r = maximize(f, Eigen::VectorXd::Constant(1, 6.0));
    CHECK(r.converged);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("budget exhaustion is flagged") {
    const Objective f = [](const Eigen::VectorXd &x) { return -x.squaredNorm() * x.squaredNorm(); };
    OptimOptions opt;
    opt.max_evals = 10;
    auto r = maximize(f, Eigen::VectorXd::Constant(3, 4.0), opt);
    CHECK(!r.converged);
    CHECK(r.message == "evaluation budget exhausted");
    CHECK(r.value > f(Eigen::VectorXd::Constant(3, 4.0)) - 1e-12);
  }
}

TEST_CASE("vcov_from_hessian") {
  SUBCASE("quadratic") {
    Eigen::MatrixXd A(3, 3);
    A << 4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0;
    Eigen::VectorXd c(3);
    c << 0.3, -1.0, 2.0;
    const Objective f = [&](const Eigen::VectorXd &x) {
      return -0.5 * (x - c).dot(A * (x - c)) + 7.0;
    };
    auto V = vcov_from_hessian(f, c);
    REQUIRE(V.has_value());
    CHECK((*V - A.inverse()).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("one-parameter bernoulli GLM") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    std::vector<double> x(60), y(60);
    for (int i = 0; i < 60; ++i) {
      x[i] = z(rng);
      y[i] = (i % 3 == 0) ? 1.0 : 0.0;
    }
    const Objective f = [&](const Eigen::VectorXd &b) {
      double s = 0.0;
      for (int i = 0; i < 60; ++i) s += y[i] * x[i] * b(0) - log1pexp(x[i] * b(0));
      return s;
    };
    const double beta = 0.4;
    double info = 0.0;
    for (int i = 0; i < 60; ++i) {
      const double e = std::exp(x[i] * beta);
      info += x[i] * x[i] * e / ((1.0 + e) * (1.0 + e));
    }
    auto V = vcov_from_hessian(f, Eigen::VectorXd::Constant(1, beta));
    REQUIRE(V.has_value());
    CHECK(std::abs((*V)(0, 0) * info - 1.0) <= 1e-5);
  }
  SUBCASE("flat maximum gives no covariance") {
    const Objective f = [](const Eigen::VectorXd &x) { return -std::pow(x.squaredNorm(), 2); };
    CHECK(!vcov_from_hessian(f, Eigen::VectorXd::Zero(2)).has_value());
  }
}

TEST_CASE("LMM fit matches the closed-form MLE and information") {
  const int M = 40, m = 5;
  auto data = balanced_lmm(M, m, 17);
  double grand = 0.0, ssw = 0.0, ssb = 0.0;
  std::vector<double> means;
  for (const Group &g : data.groups()) {
    means.push_back(g.y.mean());
    grand += g.y.sum();
  }
  grand /= double(M * m);
  for (int i = 0; i < M; ++i) {
    const Group &g = data.group(i);
    ssw += (g.y.array() - means[i]).square().sum();
    ssb += (means[i] - grand) * (means[i] - grand);
  }
  const double s2e = ssw / (M * (m - 1));
  const double lambda = m * ssb / M;
  const double s2u = (lambda - s2e) / m;
  REQUIRE(s2u > 0.0);

  auto s = testutil::spec(ResponseFamily::gaussian_identity, RaneffFamily::gaussian, 1, 1);
  for (int k : {1, 3}) {
    auto f = fit(data, s, k);
    CHECK(f.converged);
    CHECK(std::abs(f.params_hat.beta(0) - grand) <= 1e-5);
    CHECK(std::abs(f.params_hat.response(0) - s2e) <= 1e-5);
    CHECK(std::abs(f.params_hat.raneff(0, 0) - s2u) <= 1e-5);

    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
    info(0, 0) = M * m / lambda;
    info(1, 1) = s2e * s2e * 0.5 * M * ((m - 1) / (s2e * s2e) + 1.0 / (lambda * lambda));
    info(1, 2) = info(2, 1) = s2e * s2u * 0.5 * M * m / (lambda * lambda);
    info(2, 2) = s2u * s2u * 0.5 * M * m * m / (lambda * lambda);
    const Eigen::Matrix3d V = info.inverse();
    REQUIRE(f.vcov.has_value());
    CHECK((*f.vcov - V).cwiseAbs().maxCoeff() <= 1e-4 * V.cwiseAbs().maxCoeff());
    CHECK((f.std_errors - V.diagonal().cwiseSqrt()).cwiseAbs().maxCoeff() <= 1e-4);
    CHECK(f.names == std::vector<std::string>{"1", "resid_var", "sigma2"});
  }
}

TEST_CASE("bernoulli fit recovers the truth") {
  auto data = bernoulli_data(200, 5, -0.5, 1.0, 1.0, 2024);
  auto s = testutil::spec(ResponseFamily::bernoulli_logit, RaneffFamily::gaussian, 2, 1);
  auto f = fit(data, s, 3);
  CHECK(f.converged);
  REQUIRE(f.vcov.has_value());
  CHECK(std::abs(f.params_hat.beta(0) + 0.5) <= 3.0 * f.std_errors(0));
  CHECK(std::abs(f.params_hat.beta(1) - 1.0) <= 3.0 * f.std_errors(1));
  CHECK(f.diagnostics.grad_inf_norm <= 1e-6);
  CHECK(f.n_loglik_evals > 0);

  SUBCASE("softplus and log transforms agree") {
    FitOptions opt;
    opt.transform = PositiveTransform::softplus;
    auto g = fit(data, s, 3, opt);
    CHECK(g.converged);
    CHECK((g.params_hat.beta - f.params_hat.beta).cwiseAbs().maxCoeff() <= 1e-4);
    CHECK(std::abs(g.params_hat.raneff(0, 0) - f.params_hat.raneff(0, 0)) <= 1e-4);
  }
  SUBCASE("deterministic") {
    auto g = fit(data, s, 3);
    CHECK(g.estimates == f.estimates);
    CHECK(g.loglik == f.loglik);
    CHECK(*g.vcov == *f.vcov);
    CHECK(g.n_loglik_evals == f.n_loglik_evals);
    CHECK(g.diagnostics.inner_iterations == f.diagnostics.inner_iterations);
  }
  SUBCASE("k does not change the parameter layout") {
    auto g = fit(data, s, 1);
    CHECK(g.names == f.names);
    CHECK(g.estimates.size() == f.estimates.size());
  }
  SUBCASE("GQ fit runs") {
    FitOptions opt;
    opt.method = Method::GQ;
    auto g = fit(data, s, 10, opt);
    CHECK(g.method == Method::GQ);
    CHECK(std::isfinite(g.loglik));
  }
}

TEST_CASE("wald_ci") {
  FitResult f;
  f.names = {"b", "sigma2"};
  f.log_scale = {false, true};
  f.estimates = Eigen::Vector2d(0.0, 1.0);
  f.vcov = Eigen::Matrix2d(Eigen::Vector2d(1.0, 0.25).asDiagonal());
  f.std_errors = Eigen::Vector2d(1.0, 0.5);
  auto ci = wald_ci(f, 0.95);
  REQUIRE(ci.size() == 2);
  CHECK(ci[0].lower == doctest::Approx(-1.959964).epsilon(1e-6));
  CHECK(ci[0].upper == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(ci[1].estimate == doctest::Approx(std::exp(1.0)));
  CHECK(ci[1].lower == doctest::Approx(std::exp(1.0 - 0.979982)).epsilon(1e-6));
  CHECK(ci[1].upper == doctest::Approx(std::exp(1.0 + 0.979982)).epsilon(1e-6));

  f.vcov.reset();
  f.std_errors.setConstant(std::nan(""));
  CHECK_THROWS_AS(wald_ci(f), std::invalid_argument);
}

TEST_CASE("fit rejects bad input") {
  auto data = bernoulli_data(5, 3, 0.0, 1.0, 1.0, 1);
  auto s = testutil::spec(ResponseFamily::bernoulli_logit, RaneffFamily::gaussian, 2, 1);
  CHECK_THROWS_AS(fit(data, s, 0), std::invalid_argument);
  auto wrong = testutil::spec(ResponseFamily::bernoulli_logit, RaneffFamily::gaussian, 3, 1);
  CHECK_THROWS_AS(fit(data, wrong, 3), std::invalid_argument);
}
