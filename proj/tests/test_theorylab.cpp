#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "aghq/marglik.hpp"
#include "aghq/theorylab.hpp"
#include "test_util.hpp"

using namespace aghq;

namespace {

ModelSpec bernoulli_spec() { return testutil::spec(ResponseFamily::bernoulli_logit, RaneffFamily::gaussian, 2, 1); }

Parameters bernoulli_params() {
  auto p = Parameters::defaults(bernoulli_spec());
  p.beta << -0.5, 1.0;
  return p;
}

} // namespace

TEST_CASE("oracle_group_loglik") {
  SUBCASE("gaussian/gaussian closed form") {
    auto s = testutil::spec(ResponseFamily::gaussian_identity);
    auto p = Parameters::defaults(s);
    p.response(0) = 0.5;
    p.raneff(0, 0) = 2.0;
    auto g = testutil::intercept_group({0.3, 1.9, 1.2, -0.4});
    const int m = 4;
    Eigen::MatrixXd C = 0.5 * Eigen::MatrixXd::Identity(m, m) + 2.0 * Eigen::MatrixXd::Ones(m, m);
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    const Eigen::MatrixXd L = llt.matrixL();
    const double truth = -0.5 * (m * std::log(2.0 * std::numbers::pi) +
                                 2.0 * L.diagonal().array().log().sum() + g.y.dot(llt.solve(g.y)));
    CHECK(std::abs(oracle_group_loglik(g, s, p) - truth) <= 1e-10);
  }
  SUBCASE("bernoulli agrees with AQ at k = 50") {
    std::mt19937_64 rng(12);
    auto s = bernoulli_spec();
    auto p = bernoulli_params();
    for (int rep = 0; rep < 5; ++rep) {
      auto g = testutil::bernoulli_group(rng, 7 + 10 * rep, -0.5, 1.0, 1.0);
      const double aq = aq_group_loglik(g, s, p, gauss_hermite(50, 1), adapt(g, s, p));
      CHECK(std::abs(oracle_group_loglik(g, s, p) - aq) <= 1e-9);
    }
  }
  SUBCASE("shifted gaussian integrand") {
    FunctionLogIntegrand f(1, [](const Eigen::VectorXd &u, int) {
      VectorEval r;
      const double e = u(0) - 10.0;
      r.value = -0.5 * e * e;
      r.grad = Eigen::VectorXd::Constant(1, -e);
      r.hess = -Eigen::MatrixXd::Identity(1, 1);
      return r;
    });
    CHECK(std::abs(oracle_log_integral(f) - 0.5 * std::log(2.0 * std::numbers::pi)) <= 1e-10);
  }
  SUBCASE("heavy left tail of the log-gamma frailty") {
    // No data: the integral of the frailty density itself is 1.
    auto s = testutil::spec(ResponseFamily::weibull_ph, RaneffFamily::log_gamma_frailty, 0, 1);
    auto p = Parameters::defaults(s);
    p.raneff(0, 0) = 2.0;
    const PreparedModel model(s, p);
    FunctionLogIntegrand prior(1, [&](const Eigen::VectorXd &u, int order) {
      const Scalar3 r = model.raneff1(u(0), order);
      VectorEval v;
      v.value = r.value;
      v.grad = Eigen::VectorXd::Constant(1, r.d1);
      v.hess = Eigen::MatrixXd::Constant(1, 1, r.d2);
      return v;
    });
    CHECK(std::abs(oracle_log_integral(prior)) <= 1e-10);
  }
  SUBCASE("p > 1 rejected") {
    auto s = testutil::spec(ResponseFamily::poisson_log, RaneffFamily::gaussian, 0, 2);
    Group g = testutil::intercept_group({1, 2});
    g.V = Eigen::MatrixXd::Ones(2, 2);
    CHECK_THROWS_AS(oracle_group_loglik(g, s, Parameters::defaults(s)), std::invalid_argument);
  }
  SUBCASE("self-consistency") {
    std::mt19937_64 rng(3);
    auto g = testutil::bernoulli_group(rng, 40, -0.5, 1.0, 1.0);
    CHECK_NOTHROW(check_oracle_consistency(g, bernoulli_spec(), bernoulli_params()));
  }
}

TEST_CASE("simulate_group") {
  std::mt19937_64 a(5), b(5);
  auto s = bernoulli_spec();
  auto g1 = simulate_group(s, bernoulli_params(), 30, a);
  auto g2 = simulate_group(s, bernoulli_params(), 30, b);
  CHECK(g1.y == g2.y);
  CHECK(g1.X == g2.X);
  CHECK((g1.X.col(0).array() == 1.0).all());
  CHECK(((g1.y.array() == 0.0) || (g1.y.array() == 1.0)).all());

  auto ws = testutil::spec(ResponseFamily::weibull_ph, RaneffFamily::log_gamma_frailty, 1, 1);
  auto wp = Parameters::defaults(ws);
  wp.response << 0.5, 1.3;
  auto wg = simulate_group(ws, wp, 25, a);
  CHECK((wg.y.array() > 0.0).all());
  CHECK(wg.status.size() == 25);
}

TEST_CASE("rate_check") {
  auto s = bernoulli_spec();
  auto p = bernoulli_params();
  SUBCASE("bernoulli slopes follow the rate exponent") {
    auto reps = rate_check(s, p, std::vector<int>{1, 4}, {10, 30, 100, 300, 1000}, 60, 99);
    REQUIRE(reps.size() == 2);
    REQUIRE(reps[0].slope.has_value());
    REQUIRE(reps[1].slope.has_value());
    CHECK(reps[0].expected_slope == -1);
    CHECK(reps[1].expected_slope == -2);
    CHECK(std::abs(*reps[0].slope + 1.0) <= 0.5);
    CHECK(std::abs(*reps[1].slope + 2.0) <= 0.6);
    CHECK(std::abs(*reps[1].slope - *reps[0].slope + 1.0) <= 0.6);
    for (const auto &row : reps[0].rows) CHECK(row.median_error > 0.0);

    auto single = rate_check(s, p, 1, {10, 30, 100, 300, 1000}, 60, 99);
    CHECK(*single.slope == *reps[0].slope);
  }
  SUBCASE("gaussian response is unidentifiable") {
    auto gs = testutil::spec(ResponseFamily::gaussian_identity, RaneffFamily::gaussian, 1, 1);
    auto gp = Parameters::defaults(gs);
    auto r = rate_check(gs, gp, 3, {10, 30, 100, 1000}, 10, 1);
    CHECK(!r.slope.has_value());
    CHECK(r.note.find("rate unidentifiable") != std::string::npos);
    for (const auto &row : r.rows) CHECK(row.at_noise_floor);
  }
  SUBCASE("deterministic") {
    auto a = rate_check(s, p, 2, {5, 20, 80, 500}, 20, 4);
    auto b = rate_check(s, p, 2, {5, 20, 80, 500}, 20, 4);
    for (std::size_t i = 0; i < a.rows.size(); ++i)
      CHECK(a.rows[i].median_error == b.rows[i].median_error);
  }
  SUBCASE("grid validation") {
    CHECK_THROWS_AS(rate_check(s, p, 1, {10, 30, 100}, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(rate_check(s, p, 1, {10, 20, 30, 40}, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(rate_check(s, p, 1, {10, 30, 30, 1000}, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(rate_check(s, p, 0, {10, 30, 100, 1000}, 5, 1), std::invalid_argument);
  }
}

TEST_CASE("gq_divergence_demo") {
  auto r = gq_divergence_demo(bernoulli_spec(), bernoulli_params(), 5, {1, 10, 100, 1000}, 40, 7);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].m == 1);
  for (const auto &row : r.rows) {
    CHECK(row.gq_fraction_below_half >= 0.0);
    CHECK(row.gq_fraction_below_half <= 1.0);
  }
  CHECK(r.rows[3].gq_fraction_below_half <= 0.2);
  CHECK(r.rows[3].aq_fraction_below_half >= 0.9);
  CHECK(r.rows[3].aq_median_rel_error < r.rows[3].gq_median_rel_error);
}

TEST_CASE("quantiles") {
  auto q = quantiles({3.0, 1.0, 2.0, 4.0, 5.0});
  CHECK(q.q50 == 3.0);
  CHECK(q.q025 == doctest::Approx(1.1));
  CHECK(q.q975 == doctest::Approx(4.9));
  auto one = quantiles({7.0});
  CHECK(one.q025 == 7.0);
  CHECK(one.q975 == 7.0);
  CHECK_THROWS_AS(quantiles({}), std::invalid_argument);
}

TEST_CASE("simulate_study") {
  SUBCASE("design") {
    SimStudyConfig c;
    c.M = 20;
    c.m = 4;
    std::mt19937_64 rng(1);
    auto d = simulate_study_dataset(c, rng);
    CHECK(d.M() == 20);
    CHECK(d.d() == 4);
    for (const Group &g : d.groups()) {
      CHECK(g.X(0, 2) == 0.0);
      CHECK(g.X(3, 2) == 3.0);
      CHECK(g.X.col(3) == (g.X.col(1).array() * g.X.col(2).array()).matrix());
      CHECK((g.X.col(1).array() == g.X(0, 1)).all());
    }
  }
  SUBCASE("a single replicate echoes its fit") {
    SimStudyConfig c;
    c.M = 60;
    c.m = 4;
    c.replicates = 1;
    c.k_grid = {3};
    c.seed = 11;
    auto rep = simulate_study(c);
    REQUIRE(rep.per_k.size() == 1);
    std::mt19937_64 rng(11);
    auto data = simulate_study_dataset(c, rng);
    auto f = fit(data, testutil::spec(ResponseFamily::bernoulli_logit, RaneffFamily::gaussian, 4, 1), 3);
    const double e = std::abs(f.params_hat.beta(0) - c.beta_true[0]);
    CHECK(rep.replicates[0].ok);
    CHECK(rep.per_k[0].beta0_abs_error.q025 == doctest::Approx(e).epsilon(1e-12));
    CHECK(rep.per_k[0].beta0_abs_error.q50 == doctest::Approx(e).epsilon(1e-12));
    CHECK(rep.per_k[0].beta0_abs_error.q975 == doctest::Approx(e).epsilon(1e-12));
    CHECK(rep.per_k[0].n_ok + rep.per_k[0].failures == 1);
    CHECK(rep.per_k[0].evals_mean == f.n_loglik_evals);
  }
  SUBCASE("deterministic and ordered") {
    SimStudyConfig c;
    c.M = 40;
    c.replicates = 6;
    c.k_grid = {1, 3};
    auto a = simulate_study(c);
    auto b = simulate_study(c);
    for (std::size_t i = 0; i < a.replicates.size(); ++i) {
      CHECK(a.replicates[i].beta0_hat == b.replicates[i].beta0_hat);
      CHECK(a.replicates[i].n_loglik_evals == b.replicates[i].n_loglik_evals);
    }
    for (const auto &k : a.per_k) {
      CHECK(k.beta0_abs_error.q025 <= k.beta0_abs_error.q50);
      CHECK(k.beta0_abs_error.q50 <= k.beta0_abs_error.q975);
      CHECK(k.beta0_coverage >= 0.0);
      CHECK(k.beta0_coverage <= 1.0);
    }
  }
  SUBCASE("config validation") {
    SimStudyConfig c;
    c.beta_true = {1.0};
    CHECK_THROWS_AS(simulate_study(c), std::invalid_argument);
    c = SimStudyConfig{};
    c.k_grid = {};
    CHECK_THROWS_AS(simulate_study(c), std::invalid_argument);
  }
}
