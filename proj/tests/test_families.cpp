#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "aghq/families.hpp"

using namespace aghq;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

ModelSpec make_spec(ResponseFamily r, RaneffFamily g = RaneffFamily::gaussian, int d = 0,
                    int p = 1) {
  ModelSpec s;
  s.response = r;
  s.raneff = g;
  s.d = d;
  s.p = p;
  return s;
}

// Trapezoid rule on [a, b] with n panels.
template <class F> double trapezoid(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

} // namespace

TEST_CASE("response log-density reference values") {
  auto bern = make_spec(ResponseFamily::bernoulli_logit);
  auto pois = make_spec(ResponseFamily::poisson_log);
  auto weib = make_spec(ResponseFamily::weibull_ph);
  auto gaus = make_spec(ResponseFamily::gaussian_identity);

  CHECK(response_logdensity(bern, 1, 0, 0.0, Parameters::defaults(bern), 0).value ==
        doctest::Approx(-std::log(2.0)));
  CHECK(response_logdensity(pois, 0, 0, 0.0, Parameters::defaults(pois), 0).value ==
        doctest::Approx(-1.0));
  CHECK(response_logdensity(weib, 1, 1, 0.0, Parameters::defaults(weib), 0).value ==
        doctest::Approx(-1.0));
  CHECK(response_logdensity(gaus, 0.5, 0, 0.5, Parameters::defaults(gaus), 0).value ==
        doctest::Approx(-0.5 * kLog2Pi));
}

TEST_CASE("bernoulli log(1+e^eta) does not overflow") {
  auto bern = make_spec(ResponseFamily::bernoulli_logit);
  const auto p = Parameters::defaults(bern);
  auto r = response_logdensity(bern, 0, 0, 800.0, p, 2);
  CHECK(r.value == doctest::Approx(-800.0));
  CHECK(r.d1 == doctest::Approx(-1.0));
  auto s = response_logdensity(bern, 1, 0, -800.0, p, 2);
  CHECK(s.value == doctest::Approx(-800.0));
  CHECK(std::isfinite(s.d2));
  CHECK(log1pexp(40.0) == doctest::Approx(40.0 + std::exp(-40.0)).epsilon(1e-15));
}

TEST_CASE("invalid responses are rejected") {
  auto bern = make_spec(ResponseFamily::bernoulli_logit);
  auto pois = make_spec(ResponseFamily::poisson_log);
  auto weib = make_spec(ResponseFamily::weibull_ph);
  CHECK_THROWS_AS(response_logdensity(bern, 2, 0, 0.0, Parameters::defaults(bern), 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(response_logdensity(pois, 1.5, 0, 0.0, Parameters::defaults(pois), 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(response_logdensity(pois, -1, 0, 0.0, Parameters::defaults(pois), 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(response_logdensity(weib, 0.0, 1, 0.0, Parameters::defaults(weib), 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(response_logdensity(weib, 1.0, 2, 0.0, Parameters::defaults(weib), 0),
                  std::invalid_argument);
}

TEST_CASE("random-effect log-density reference values") {
  auto g1 = make_spec(ResponseFamily::bernoulli_logit);
  CHECK(raneff_logdensity(g1, Eigen::VectorXd::Zero(1), Parameters::defaults(g1), 0).value ==
        doctest::Approx(-0.5 * kLog2Pi));

  auto fr = make_spec(ResponseFamily::weibull_ph, RaneffFamily::log_gamma_frailty);
  CHECK(raneff_logdensity(fr, Eigen::VectorXd::Zero(1), Parameters::defaults(fr), 0).value ==
        doctest::Approx(-1.0));

  auto g2 = make_spec(ResponseFamily::bernoulli_logit, RaneffFamily::gaussian, 0, 2);
  CHECK(raneff_logdensity(g2, Eigen::VectorXd::Ones(2), Parameters::defaults(g2), 0).value ==
        doctest::Approx(-kLog2Pi - 1.0));

  auto bad = Parameters::defaults(g2);
  bad.raneff << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(raneff_logdensity(g2, Eigen::VectorXd::Ones(2), bad, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_spec(ResponseFamily::weibull_ph, RaneffFamily::log_gamma_frailty, 0, 2)
                      .validate(),
                  std::invalid_argument);
}

TEST_CASE("analytic derivatives match central differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  const double h = 1e-5;
  auto rel_close = [](double a, double b) {
    return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(b));
  };

  for (auto fam : {ResponseFamily::bernoulli_logit, ResponseFamily::poisson_log,
                   ResponseFamily::gaussian_identity, ResponseFamily::weibull_ph}) {
    auto spec = make_spec(fam);
    auto params = Parameters::defaults(spec);
    for (Eigen::Index i = 0; i < params.response.size(); ++i)
      params.response(i) = std::exp(0.5 * unif(rng));
    for (int rep = 0; rep < 50; ++rep) {
      double y = 0, status = 0;
      switch (fam) {
      case ResponseFamily::bernoulli_logit: y = rep % 2; break;
      case ResponseFamily::poisson_log: y = rep % 5; break;
      case ResponseFamily::gaussian_identity: y = unif(rng); break;
      case ResponseFamily::weibull_ph:
        y = std::exp(unif(rng));
        status = rep % 2;
        break;
      }
      const double eta = unif(rng);
      auto r = response_logdensity(spec, y, status, eta, params, 2);
      auto up = response_logdensity(spec, y, status, eta + h, params, 2);
      auto dn = response_logdensity(spec, y, status, eta - h, params, 2);
      CHECK_MESSAGE(rel_close(r.d1, (up.value - dn.value) / (2 * h)), to_string(fam));
      CHECK_MESSAGE(rel_close(r.d2, (up.d1 - dn.d1) / (2 * h)), to_string(fam));
    }
  }

  for (auto fam : {RaneffFamily::gaussian, RaneffFamily::log_gamma_frailty}) {
    auto spec = make_spec(ResponseFamily::weibull_ph, fam);
    auto params = Parameters::defaults(spec);
    for (int rep = 0; rep < 50; ++rep) {
      params.raneff(0, 0) = std::exp(unif(rng));
      Eigen::VectorXd u = Eigen::VectorXd::Constant(1, unif(rng));
      auto r = raneff_logdensity(spec, u, params, 2);
      auto up = raneff_logdensity(spec, (u.array() + h).matrix(), params, 2);
      auto dn = raneff_logdensity(spec, (u.array() - h).matrix(), params, 2);
      CHECK(rel_close(r.grad(0), (up.value - dn.value) / (2 * h)));
      CHECK(rel_close(r.hess(0, 0), (up.grad(0) - dn.grad(0)) / (2 * h)));
    }
  }

  // p = 2 Gaussian with correlation
  auto spec = make_spec(ResponseFamily::bernoulli_logit, RaneffFamily::gaussian, 0, 2);
  auto params = Parameters::defaults(spec);
  params.raneff << 2.0, 0.6, 0.6, 0.5;
  Eigen::VectorXd u(2);
  u << 0.3, -0.7;
  auto r = raneff_logdensity(spec, u, params, 2);
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(2, j) * h;
    auto up = raneff_logdensity(spec, u + e, params, 2);
    auto dn = raneff_logdensity(spec, u - e, params, 2);
    CHECK(rel_close(r.grad(j), (up.value - dn.value) / (2 * h)));
    for (int i = 0; i < 2; ++i)
      CHECK(rel_close(r.hess(i, j), (up.grad(i) - dn.grad(i)) / (2 * h)));
  }
}

TEST_CASE("log-densities normalize") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const double eta = unif(rng);

    auto bern = make_spec(ResponseFamily::bernoulli_logit);
    double sb = 0;
    for (int y = 0; y <= 1; ++y)
      sb += std::exp(response_logdensity(bern, y, 0, eta, Parameters::defaults(bern), 0).value);
    CHECK(sb == doctest::Approx(1.0).epsilon(1e-12));

    auto pois = make_spec(ResponseFamily::poisson_log);
    double sp = 0;
    for (int y = 0; y <= 60; ++y)
      sp += std::exp(response_logdensity(pois, y, 0, eta, Parameters::defaults(pois), 0).value);
    CHECK(sp == doctest::Approx(1.0).epsilon(1e-10));

    auto gaus = make_spec(ResponseFamily::gaussian_identity);
    auto gp = Parameters::defaults(gaus);
    gp.response(0) = std::exp(unif(rng));
    const double sd = std::sqrt(gp.response(0));
    const double sg = trapezoid(
        [&](double y) { return std::exp(response_logdensity(gaus, y, 0, eta, gp, 0).value); },
        eta - 12 * sd, eta + 12 * sd, 20000);
    CHECK(std::abs(sg - 1.0) < 1e-4);

    // Event density on t > 0 via t = e^s.
    auto weib = make_spec(ResponseFamily::weibull_ph);
    auto wp = Parameters::defaults(weib);
    wp.response(1) = std::exp(0.5 * unif(rng));
    const double sw = trapezoid(
        [&](double s) {
          const double t = std::exp(s);
          return t * std::exp(response_logdensity(weib, t, 1, eta, wp, 0).value);
        },
        -60.0, 8.0, 200000);
    CHECK(std::abs(sw - 1.0) < 1e-4);

    auto gre = make_spec(ResponseFamily::bernoulli_logit);
    auto rp = Parameters::defaults(gre);
    rp.raneff(0, 0) = std::exp(unif(rng));
    const double s_re = trapezoid(
        [&](double u) {
          return std::exp(raneff_logdensity(gre, Eigen::VectorXd::Constant(1, u), rp, 0).value);
        },
        -30.0, 30.0, 60000);
    CHECK(std::abs(s_re - 1.0) < 1e-4);

    auto fr = make_spec(ResponseFamily::weibull_ph, RaneffFamily::log_gamma_frailty);
    auto fp = Parameters::defaults(fr);
    fp.raneff(0, 0) = std::exp(unif(rng));
    const double s_fr = trapezoid(
        [&](double b) {
          return std::exp(raneff_logdensity(fr, Eigen::VectorXd::Constant(1, b), fp, 0).value);
        },
        -80.0, 6.0, 200000);
    CHECK(std::abs(s_fr - 1.0) < 1e-4);
  }
}

TEST_CASE("gaussian random-effect density peaks at zero") {
  auto spec = make_spec(ResponseFamily::bernoulli_logit, RaneffFamily::gaussian, 0, 2);
  auto params = Parameters::defaults(spec);
  params.raneff << 1.5, -0.4, -0.4, 0.8;
  auto at0 = raneff_logdensity(spec, Eigen::VectorXd::Zero(2), params, 1);
  CHECK(at0.grad.norm() == 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd u(2);
    u << z(rng), z(rng);
    CHECK(raneff_logdensity(spec, u, params, 0).value < at0.value);
  }
}

TEST_CASE("natural <-> unconstrained round trip") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  for (auto t : {PositiveTransform::log, PositiveTransform::softplus}) {
    for (int p : {1, 3}) {
      auto spec = make_spec(ResponseFamily::gaussian_identity, RaneffFamily::gaussian, 2, p);
      for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd theta(spec.n_params());
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = z(rng);
        const Parameters nat = from_unconstrained(spec, theta, t);
        const Eigen::VectorXd back = to_unconstrained(spec, nat, t);
        CHECK((back - theta).cwiseAbs().maxCoeff() <= 1e-12);
        const Parameters nat2 = from_unconstrained(spec, back, t);
        CHECK((nat2.raneff - nat.raneff).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(nat.response(0) > 0.0);
      }
    }
  }
  auto wspec = make_spec(ResponseFamily::weibull_ph, RaneffFamily::log_gamma_frailty, 1);
  auto names = parameter_names(wspec, {"sex"});
  REQUIRE(names.size() == 4);
  CHECK(names[0] == "sex");
  CHECK(names[1] == "mu");
  CHECK(names[2] == "alpha");
  CHECK(names[3] == "sigma2");
  auto mask = log_scale_mask(wspec);
  CHECK(mask == std::vector<bool>{false, true, true, true});
}
