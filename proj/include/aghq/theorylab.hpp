#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aghq/data.hpp"
#include "aghq/families.hpp"
#include "aghq/fit.hpp"
#include "aghq/inner.hpp"

namespace aghq {

// --- brute-force oracle ---------------------------------------------------

/// log of the integral of exp(f) over R for a one-dimensional log-concave-ish
/// integrand: adaptive Simpson on exp(f(u) - f(mode)) over mode +- 15
/// posterior SDs, with absolute tolerance `tol` on that shifted integrand.
double oracle_log_integral(const LogIntegrand &f, double tol = 1e-12);

/// Exact marginal log-likelihood contribution of one group (p = 1 only;
/// throws std::invalid_argument otherwise).
double oracle_group_loglik(const Group &group, const ModelSpec &spec, const Parameters &params,
                           double tol = 1e-12);

/// Throws std::runtime_error unless the oracle at tolerances 1e-10 and
/// 1e-12 agrees to 1e-9 on this group.
void check_oracle_consistency(const Group &group, const ModelSpec &spec,
                              const Parameters &params);

/// One simulated group of size m: intercept plus N(0,1) covariates in X,
/// V = 1, random effect drawn from the model. Weibull times are uncensored.
Group simulate_group(const ModelSpec &spec, const Parameters &params, int m,
                     std::mt19937_64 &rng, std::string id = "g");

// --- AQ error rate ---------------------------------------------------------

struct RateRow {
  int m = 0;
  double median_error = 0.0;
  bool at_noise_floor = false; ///< excluded from the regression
};

struct RateReport {
  int k = 1;
  std::vector<int> m_grid;
  std::vector<RateRow> rows;
  std::optional<double> slope; ///< empty when the rate is unidentifiable
  std::optional<double> log_C;
  int expected_slope = -1;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::string note;
};

/// Per m, median |AQ - oracle| over simulated single groups, then a
/// least-squares fit of log(median) on log m.
RateReport rate_check(const ModelSpec &spec, const Parameters &params, int k,
                      const std::vector<int> &m_grid, int replicates, std::uint64_t seed);

/// Several k at once on the same simulated groups and oracle values.
std::vector<RateReport> rate_check(const ModelSpec &spec, const Parameters &params,
                                   const std::vector<int> &ks, const std::vector<int> &m_grid,
                                   int replicates, std::uint64_t seed);

// --- GQ divergence -----------------------------------------------------------

struct DivergenceRow {
  int m = 0;
  double gq_median_rel_error = 0.0;
  double gq_fraction_below_half = 0.0;
  double aq_median_rel_error = 0.0;
  double aq_fraction_below_half = 0.0;
};

struct DivergenceReport {
  int k = 1;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::vector<DivergenceRow> rows;
};

/// Relative errors |pi_hat / pi - 1| of GQ and AQ group likelihoods.
DivergenceReport gq_divergence_demo(const ModelSpec &spec, const Parameters &params, int k,
                                    const std::vector<int> &m_grid, int replicates,
                                    std::uint64_t seed);

// --- simulation study ---------------------------------------------------------

/// Bernoulli random-intercept design: x_ij = (1, x_i, t_j, x_i t_j),
/// x_i ~ Bernoulli(1/2), t_j = 0..m-1.
struct SimStudyConfig {
  int M = 100;
  int m = 3;
  double sigma_true = 1.0;
  std::vector<double> beta_true{-1.0, 1.0, 0.5, -0.5};
  int replicates = 50;
  std::vector<int> k_grid{1, 2, 4};
  std::uint64_t seed = 1;
  Method method = Method::AQ;

  void validate() const;
};

GroupedDataset simulate_study_dataset(const SimStudyConfig &config, std::mt19937_64 &rng);

struct Quantiles {
  double q025 = 0.0, q50 = 0.0, q975 = 0.0;
};

/// Type-7 (linear interpolation) sample quantiles; throws on empty input.
Quantiles quantiles(std::vector<double> x);

struct SimReplicate {
  int replicate = 0;
  int k = 1;
  bool ok = false;
  std::string error;
  double beta0_hat = 0.0, beta0_se = 0.0, sigma_hat = 0.0;
  bool covered = false;
  double wall_time = 0.0;
  int n_loglik_evals = 0;
};

struct SimKSummary {
  int k = 1;
  int n_ok = 0;
  int failures = 0;
  Quantiles beta0_abs_error;
  Quantiles sigma_abs_error;
  double beta0_coverage = 0.0;
  double wall_time_mean = 0.0, wall_time_sd = 0.0;
  double evals_mean = 0.0, evals_sd = 0.0;
};

struct SimStudyReport {
  SimStudyConfig config;
  std::vector<SimKSummary> per_k;
  std::vector<SimReplicate> replicates; ///< replicate-major, k-minor
};

SimStudyReport simulate_study(const SimStudyConfig &config);

} // namespace aghq
