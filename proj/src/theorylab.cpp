#include "aghq/theorylab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "aghq/kadvisor.hpp"
#include "aghq/marglik.hpp"
#include "aghq/parallel.hpp"

namespace aghq {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Panel {
  double a, b, fa, fm, fb, whole, tol;
  int depth;
};

// Adaptive Simpson with an explicit stack; `tol` is absolute on the integral.
double adaptive_simpson(const std::function<double(double)> &f, double a, double b, double tol) {
  constexpr int kInitial = 64;
  constexpr int kMaxDepth = 50;
  double total = 0.0;
  std::vector<Panel> stack;
  const double w = (b - a) / kInitial;
  for (int i = kInitial - 1; i >= 0; --i) {
    const double lo = a + i * w, hi = lo + w, mid = 0.5 * (lo + hi);
    const double flo = f(lo), fm = f(mid), fhi = f(hi);
    stack.push_back({lo, hi, flo, fm, fhi, (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi),
                     tol / kInitial, 0});
  }
  while (!stack.empty()) {
    const Panel p = stack.back();
    stack.pop_back();
    const double m = 0.5 * (p.a + p.b);
    const double lm = 0.5 * (p.a + m), rm = 0.5 * (m + p.b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
    const double right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
    const double delta = left + right - p.whole;
    if (p.depth >= kMaxDepth || std::abs(delta) <= 15.0 * p.tol) {
      total += left + right + delta / 15.0;
    } else {
      stack.push_back({m, p.b, p.fm, frm, p.fb, right, 0.5 * p.tol, p.depth + 1});
      stack.push_back({p.a, m, p.fa, flm, p.fm, left, 0.5 * p.tol, p.depth + 1});
    }
  }
  return total;
}

struct OracleValue {
  double log_value;
  double shifted_integral; ///< integral of exp(f - f(mode))
};

OracleValue oracle(const LogIntegrand &f, double tol) {
  if (f.dim() != 1) throw std::invalid_argument("oracle integrates one-dimensional integrands only");
  if (!(tol > 0.0)) throw std::invalid_argument("oracle tolerance must be positive");
  const Adaptation a = adapt(f);
  const double mode = a.mode(0);
  const double shift = a.mode_value;
  const double sd = 1.0 / std::sqrt(a.neg_hessian(0, 0));
  Eigen::VectorXd u(1);
  auto g = [&](double x) {
    u(0) = x;
    const double v = f.value(u);
    return std::isfinite(v) ? std::exp(v - shift) : 0.0;
  };
  // Start at +-15 SD; widen while a heavy tail is still above tolerance.
  double lo = mode - 15.0 * sd, hi = mode + 15.0 * sd;
  for (int i = 0; i < 20 && g(lo) > 1e-3 * tol; ++i) lo -= 15.0 * sd;
  for (int i = 0; i < 20 && g(hi) > 1e-3 * tol; ++i) hi += 15.0 * sd;
  const double I = adaptive_simpson(g, lo, hi, tol);
  if (!(I > 0.0) || !std::isfinite(I))
    throw ModelError("oracle integral is not positive and finite", f.label());
  return {shift + std::log(I), I};
}

OracleValue group_oracle(const Group &group, const ModelSpec &spec, const Parameters &params,
                         double tol) {
  if (spec.p != 1) throw std::invalid_argument("oracle requires p = 1");
  const PreparedModel model(spec, params);
  const GroupLogJoint f(group, model);
  return oracle(f, tol);
}

void validate_grid(const ModelSpec &spec, const std::vector<int> &m_grid, int replicates, int k) {
  spec.validate();
  if (spec.p != 1) throw std::invalid_argument("theory checks require p = 1");
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (replicates < 1) throw std::invalid_argument("replicates must be at least 1");
  if (m_grid.size() < 4) throw std::invalid_argument("m_grid needs at least 4 points");
  for (std::size_t i = 0; i < m_grid.size(); ++i) {
    if (m_grid[i] < 1) throw std::invalid_argument("m_grid values must be positive");
    if (i > 0 && m_grid[i] <= m_grid[i - 1])
      throw std::invalid_argument("m_grid must be strictly increasing");
  }
  if (m_grid.back() < 100 * m_grid.front())
    throw std::invalid_argument("m_grid must span at least two decades");
}

double median(std::vector<double> x) {
  return quantiles(std::move(x)).q50;
}

double mean(const std::vector<double> &x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
}

double sd(const std::vector<double> &x) {
  if (x.size() < 2) return 0.0;
  const double mu = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return std::sqrt(s / double(x.size() - 1));
}

} // namespace

double oracle_log_integral(const LogIntegrand &f, double tol) { return oracle(f, tol).log_value; }

double oracle_group_loglik(const Group &group, const ModelSpec &spec, const Parameters &params,
                           double tol) {
  return group_oracle(group, spec, params, tol).log_value;
}

void check_oracle_consistency(const Group &group, const ModelSpec &spec,
                              const Parameters &params) {
  const double coarse = oracle_group_loglik(group, spec, params, 1e-10);
  const double fine = oracle_group_loglik(group, spec, params, 1e-12);
  if (!(std::abs(coarse - fine) <= 1e-9))
    throw std::runtime_error("oracle self-consistency failed on group '" + group.id +
                             "': tolerances 1e-10 and 1e-12 differ by " +
                             std::to_string(std::abs(coarse - fine)));
}

Group simulate_group(const ModelSpec &spec, const Parameters &params, int m,
                     std::mt19937_64 &rng, std::string id) {
  spec.validate();
  validate_parameters(spec, params);
  if (m < 1) throw std::invalid_argument("group size must be positive");
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> unif;

  Eigen::VectorXd u(spec.p);
  if (spec.raneff == RaneffFamily::gaussian) {
    for (int j = 0; j < spec.p; ++j) u(j) = z(rng);
    u = params.raneff.llt().matrixL() * u;
  } else {
    const double phi = params.raneff(0, 0);
    std::gamma_distribution<double> frailty(1.0 / phi, phi);
    u(0) = std::log(frailty(rng));
  }

  Group g;
  g.id = std::move(id);
  g.y.resize(m);
  g.X.resize(m, spec.d);
  g.V.resize(m, spec.p);
  if (spec.survival()) g.status = Eigen::VectorXd::Ones(m);
  const PreparedModel model(spec, params);
  for (int j = 0; j < m; ++j) {
    for (int c = 0; c < spec.d; ++c) g.X(j, c) = c == 0 ? 1.0 : z(rng);
    for (int c = 0; c < spec.p; ++c) g.V(j, c) = c == 0 ? 1.0 : z(rng);
    double eta = model.offset() + g.V.row(j).dot(u);
    if (spec.d > 0) eta += g.X.row(j).dot(params.beta);
    switch (spec.response) {
    case ResponseFamily::bernoulli_logit:
      g.y(j) = unif(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
      break;
    case ResponseFamily::poisson_log: {
      std::poisson_distribution<long> pois(std::exp(std::min(eta, 30.0)));
      g.y(j) = static_cast<double>(pois(rng));
      break;
    }
    case ResponseFamily::gaussian_identity:
      g.y(j) = eta + std::sqrt(params.response(0)) * z(rng);
      break;
    case ResponseFamily::weibull_ph: {
      const double alpha = params.response(1);
      double e = -std::log(unif(rng));
      g.y(j) = std::pow(e * std::exp(-eta), 1.0 / alpha);
      if (!(g.y(j) > 0.0) || !std::isfinite(g.y(j))) g.y(j) = std::numeric_limits<double>::min();
      break;
    }
    }
  }
  return g;
}

std::vector<RateReport> rate_check(const ModelSpec &spec, const Parameters &params,
                                   const std::vector<int> &ks, const std::vector<int> &m_grid,
                                   int replicates, std::uint64_t seed) {
  if (ks.empty()) throw std::invalid_argument("no k values given");
  for (int k : ks) validate_grid(spec, m_grid, replicates, k);
  const double tol = 1e-12;
  const std::size_t nk = ks.size();
  std::vector<QuadratureRule> rules;
  for (int k : ks) rules.push_back(gauss_hermite(k, 1));

  std::vector<RateReport> reps(nk);
  std::vector<std::vector<double>> xs(nk), ys(nk);
  for (std::size_t j = 0; j < nk; ++j) {
    reps[j].k = ks[j];
    reps[j].m_grid = m_grid;
    reps[j].expected_slope = -rate_exponent(ks[j]);
    reps[j].replicates = replicates;
    reps[j].seed = seed;
  }
  for (int m : m_grid) {
    // err[j * replicates + r]
    std::vector<double> err(nk * replicates), floor(replicates);
    parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t r) {
      std::mt19937_64 rng(seed + r);
      const Group g = simulate_group(spec, params, m, rng, "rep" + std::to_string(r));
      if (r == 0) check_oracle_consistency(g, spec, params);
      const OracleValue o = group_oracle(g, spec, params, tol);
      const Adaptation a = adapt(g, spec, params);
      for (std::size_t j = 0; j < nk; ++j)
        err[j * replicates + r] = std::abs(aq_group_loglik(g, spec, params, rules[j], a) - o.log_value);
      floor[r] = 10.0 * tol / o.shifted_integral + 1e3 * kEps * std::max(1.0, std::abs(o.log_value));
    });
    const double noise = median(floor);
    for (std::size_t j = 0; j < nk; ++j) {
      RateRow row;
      row.m = m;
      row.median_error = median(std::vector<double>(err.begin() + j * replicates,
                                                    err.begin() + (j + 1) * replicates));
      row.at_noise_floor = !(row.median_error > noise);
      if (!row.at_noise_floor) {
        xs[j].push_back(std::log(double(m)));
        ys[j].push_back(std::log(row.median_error));
      }
      reps[j].rows.push_back(row);
    }
  }

  for (std::size_t j = 0; j < nk; ++j) {
    RateReport &rep = reps[j];
    if (xs[j].size() < 2) {
      rep.note = "rate unidentifiable: errors at rounding level";
      continue;
    }
    const double xbar = mean(xs[j]), ybar = mean(ys[j]);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs[j].size(); ++i) {
      sxy += (xs[j][i] - xbar) * (ys[j][i] - ybar);
      sxx += (xs[j][i] - xbar) * (xs[j][i] - xbar);
    }
    rep.slope = sxy / sxx;
    rep.log_C = ybar - *rep.slope * xbar;
    if (xs[j].size() < m_grid.size())
      rep.note = std::to_string(m_grid.size() - xs[j].size()) +
                 " grid point(s) at rounding level excluded from the regression";
  }
  return reps;
}

RateReport rate_check(const ModelSpec &spec, const Parameters &params, int k,
                      const std::vector<int> &m_grid, int replicates, std::uint64_t seed) {
  return rate_check(spec, params, std::vector<int>{k}, m_grid, replicates, seed).front();
}

DivergenceReport gq_divergence_demo(const ModelSpec &spec, const Parameters &params, int k,
                                    const std::vector<int> &m_grid, int replicates,
                                    std::uint64_t seed) {
  validate_grid(spec, m_grid, replicates, k);
  const QuadratureRule rule = gauss_hermite(k, 1);
  DivergenceReport rep;
  rep.k = k;
  rep.replicates = replicates;
  rep.seed = seed;
  for (int m : m_grid) {
    std::vector<double> gq(replicates), aq(replicates);
    parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t r) {
      std::mt19937_64 rng(seed + r);
      const Group g = simulate_group(spec, params, m, rng, "rep" + std::to_string(r));
      if (r == 0) check_oracle_consistency(g, spec, params);
      const double o = oracle_group_loglik(g, spec, params);
      gq[r] = std::abs(std::expm1(gq_group_loglik(g, spec, params, rule) - o));
      aq[r] = std::abs(std::expm1(aq_group_loglik(g, spec, params, rule, adapt(g, spec, params)) - o));
    });
    auto below = [&](const std::vector<double> &x) {
      return double(std::count_if(x.begin(), x.end(), [](double v) { return v < 0.5; })) /
             double(x.size());
    };
    rep.rows.push_back({m, median(gq), below(gq), median(aq), below(aq)});
  }
  return rep;
}

void SimStudyConfig::validate() const {
  if (M < 1 || m < 1) throw std::invalid_argument("M and m must be positive");
  if (!(sigma_true > 0.0)) throw std::invalid_argument("sigma_true must be positive");
  if (beta_true.size() != 4) throw std::invalid_argument("beta_true needs 4 entries");
  if (replicates < 1) throw std::invalid_argument("replicates must be at least 1");
  if (k_grid.empty()) throw std::invalid_argument("k_grid is empty");
  for (int k : k_grid)
    if (k < 1) throw std::invalid_argument("k_grid values must be at least 1");
}

GroupedDataset simulate_study_dataset(const SimStudyConfig &c, std::mt19937_64 &rng) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> unif;
  std::bernoulli_distribution coin(0.5);
  const Eigen::Map<const Eigen::Vector4d> beta(c.beta_true.data());
  std::vector<Group> groups;
  groups.reserve(c.M);
  for (int i = 0; i < c.M; ++i) {
    Group g;
    g.id = std::to_string(i + 1);
    g.y.resize(c.m);
    g.X.resize(c.m, 4);
    g.V = Eigen::MatrixXd::Ones(c.m, 1);
    const double xi = coin(rng) ? 1.0 : 0.0;
    const double u = c.sigma_true * z(rng);
    for (int j = 0; j < c.m; ++j) {
      g.X.row(j) << 1.0, xi, double(j), xi * j;
      const double eta = g.X.row(j).dot(beta) + u;
      g.y(j) = unif(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
    groups.push_back(std::move(g));
  }
  return GroupedDataset(std::move(groups), {"1", "x", "t", "x:t"}, {"1"}, {"y"});
}

Quantiles quantiles(std::vector<double> x) {
  if (x.empty()) throw std::invalid_argument("quantiles of an empty sample");
  std::sort(x.begin(), x.end());
  auto q = [&](double p) {
    const double h = (double(x.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - double(lo)) * (x[hi] - x[lo]);
  };
  return {q(0.025), q(0.5), q(0.975)};
}

SimStudyReport simulate_study(const SimStudyConfig &config) {
  config.validate();
  const std::size_t nk = config.k_grid.size();
  SimStudyReport rep;
  rep.config = config;
  rep.replicates.resize(config.replicates * nk);
  ModelSpec spec;
  spec.response = ResponseFamily::bernoulli_logit;
  spec.raneff = RaneffFamily::gaussian;
  spec.d = 4;
  spec.p = 1;

  parallel_for(static_cast<std::size_t>(config.replicates), [&](std::size_t r) {
    std::mt19937_64 rng(config.seed + r);
    const GroupedDataset data = simulate_study_dataset(config, rng);
    for (std::size_t ki = 0; ki < nk; ++ki) {
      SimReplicate &s = rep.replicates[r * nk + ki];
      s.replicate = static_cast<int>(r);
      s.k = config.k_grid[ki];
      FitOptions opt;
      opt.method = config.method;
      try {
        const FitResult f = fit(data, spec, s.k, opt);
        s.wall_time = f.wall_time;
        s.n_loglik_evals = f.n_loglik_evals;
        s.beta0_hat = f.params_hat.beta(0);
        s.beta0_se = f.std_errors(0);
        s.sigma_hat = std::sqrt(f.params_hat.raneff(0, 0));
        if (!f.converged) {
          s.error = "not converged: " + f.diagnostics.message;
        } else if (!f.vcov) {
          s.error = "standard errors missing";
        } else {
          const WaldInterval ci = wald_ci(f, 0.95)[0];
          s.covered = ci.lower <= config.beta_true[0] && config.beta_true[0] <= ci.upper;
          s.ok = true;
        }
      } catch (const std::exception &e) {
        s.error = e.what();
      }
    }
  });

  for (std::size_t ki = 0; ki < nk; ++ki) {
    SimKSummary sum;
    sum.k = config.k_grid[ki];
    std::vector<double> eb, es, wt, ev;
    int covered = 0;
    for (int r = 0; r < config.replicates; ++r) {
      const SimReplicate &s = rep.replicates[r * nk + ki];
      if (!s.ok) {
        ++sum.failures;
        continue;
      }
      eb.push_back(std::abs(s.beta0_hat - config.beta_true[0]));
      es.push_back(std::abs(s.sigma_hat - config.sigma_true));
      wt.push_back(s.wall_time);
      ev.push_back(s.n_loglik_evals);
      covered += s.covered ? 1 : 0;
    }
    sum.n_ok = static_cast<int>(eb.size());
    if (sum.n_ok > 0) {
      sum.beta0_abs_error = quantiles(eb);
      sum.sigma_abs_error = quantiles(es);
      sum.beta0_coverage = double(covered) / sum.n_ok;
      sum.wall_time_mean = mean(wt);
      sum.wall_time_sd = sd(wt);
      sum.evals_mean = mean(ev);
      sum.evals_sd = sd(ev);
    }
    rep.per_k.push_back(sum);
  }
  return rep;
}

} // namespace aghq
