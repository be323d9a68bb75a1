#include "aghq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aghq/error.hpp"
#include "aghq/fit.hpp"
#include "aghq/kadvisor.hpp"
#include "aghq/parallel.hpp"
#include "aghq/quadrature.hpp"
#include "aghq/theorylab.hpp"

namespace aghq::cli {

namespace {

using json = nlohmann::ordered_json;

const std::vector<std::string> kResponseNames{"bernoulli_logit", "poisson_log",
                                              "gaussian_identity", "weibull_ph"};
const std::vector<std::string> kRaneffNames{"gaussian", "log_gamma_frailty"};

// A bad combination of flags detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Global {
  int threads = 0;
  bool pretty = false;
  bool quiet = false;
  std::string out;
};

struct FitFlags {
  std::string data, family, raneff = "gaussian", k, method = "aq", transform = "log";
  std::string group;
  std::vector<std::string> response, fixed, raneff_cols;
  int max_evals = 20000;
  double tol = 1e-6;
  double level = 0.95;
  bool no_vcov = false;
};

struct RecommendFlags {
  std::uint64_t groups = 0, min_group_size = 0;
};

struct RuleFlags {
  int k = 1, dim = 1;
};

struct ModelFlags {
  std::string family = "bernoulli_logit", raneff = "gaussian";
  std::vector<double> beta{-0.5, 1.0};
  double variance = 1.0;
  std::vector<double> dispersion;
};

struct RateFlags {
  ModelFlags model;
  std::vector<int> k{1, 4};
  std::vector<int> m_grid{10, 30, 100, 300, 1000, 3000};
  int replicates = 200;
  std::uint64_t seed = 42;
  std::string csv;
};

struct DemoFlags {
  ModelFlags model;
  int k = 5;
  std::vector<int> m_grid{1, 10, 100, 1000, 3000};
  int replicates = 200;
  std::uint64_t seed = 7;
  std::string csv;
};

struct SimFlags {
  SimStudyConfig config;
  std::string method = "aq";
  std::string csv;
};

struct Config {
  Global global;
  FitFlags fit;
  RecommendFlags recommend;
  RuleFlags rule;
  RateFlags rate;
  DemoFlags demo;
  SimFlags sim;
};

// Accepts "auto" or a positive integer.
const CLI::Validator kSpec = CLI::Validator(
    [](std::string &s) -> std::string {
      if (s == "auto") return {};
      try {
        std::size_t pos = 0;
        const int k = std::stoi(s, &pos);
        if (pos == s.size() && k >= 1) return {};
      } catch (const std::exception &) {
      }
      return "expected a positive integer or 'auto', got '" + s + "'";
    },
    "INT|auto");

void add_model_flags(CLI::App *app, ModelFlags &m) {
  app->add_option("--family", m.family, "Response family")
      ->check(CLI::IsMember(kResponseNames))
      ->capture_default_str();
  app->add_option("--raneff", m.raneff, "Random-effects family")
      ->check(CLI::IsMember(kRaneffNames))
      ->capture_default_str();
  app->add_option("--beta", m.beta, "Fixed effects; the first multiplies the intercept")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--variance", m.variance, "Random-effect variance (frailty variance for log_gamma_frailty)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--dispersion", m.dispersion,
                  "Response parameters: residual variance (gaussian_identity) or mu,alpha (weibull_ph)")
      ->delimiter(',');
}

std::unique_ptr<CLI::App> build_app(Config &c) {
  auto app = std::make_unique<CLI::App>(
      "Generalized linear mixed models by adaptive Gauss-Hermite quadrature", "aghq");
  app->require_subcommand(1);
  app->fallthrough();
  app->add_option("--threads", c.global.threads,
                  "Worker thread cap (default: $AGHQ_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
  app->add_flag("--pretty", c.global.pretty,
                "Print a human-readable table to stdout; JSON goes only to --out");
  app->add_flag("-q,--quiet", c.global.quiet, "Suppress warnings");
  app->add_option("-o,--out", c.global.out, "Write the JSON (or CSV for rule) result to this file");

  auto *fit = app->add_subcommand("fit", "Fit a GLMM by maximum likelihood");
  FitFlags &f = c.fit;
  fit->add_option("--data", f.data, "CSV file, one row per observation")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--family", f.family, "Response family")
      ->required()
      ->check(CLI::IsMember(kResponseNames));
  fit->add_option("--raneff", f.raneff, "Random-effects family")
      ->check(CLI::IsMember(kRaneffNames))
      ->capture_default_str();
  fit->add_option("--k", f.k, "Quadrature points per dimension, or 'auto' for k(M, m)")
      ->required()
      ->check(kSpec);
  fit->add_option("--method", f.method, "aq (adaptive) or gq (unadapted)")
      ->check(CLI::IsMember({"aq", "gq"}))
      ->capture_default_str();
  fit->add_option("--group", f.group, "Group id column (default: first column)");
  fit->add_option("--response", f.response,
                  "Response column(s) (default: y, or time,status for weibull_ph)")
      ->delimiter(',');
  fit->add_option("--fixed", f.fixed,
                  "Fixed-effect columns, '1' for an intercept (default: intercept, except for "
                  "weibull_ph, plus every remaining column)")
      ->delimiter(',');
  fit->add_option("--raneff-cols", f.raneff_cols, "Random-effect design columns (default: 1)")
      ->delimiter(',');
  fit->add_option("--transform", f.transform, "Search-scale map of positive parameters")
      ->check(CLI::IsMember({"log", "softplus"}))
      ->capture_default_str();
  fit->add_option("--max-evals", f.max_evals, "Likelihood evaluation budget of the search")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit->add_option("--tol", f.tol, "Gradient infinity-norm tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit->add_option("--level", f.level, "Wald interval level")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  fit->add_flag("--no-vcov", f.no_vcov, "Skip the observed information and standard errors");

  auto *rk = app->add_subcommand("recommend-k", "Recommended number of quadrature points k(M, m)");
  rk->add_option("--groups", c.recommend.groups, "Number of groups M")
      ->required()
      ->check(CLI::PositiveNumber);
  rk->add_option("--min-group-size", c.recommend.min_group_size, "Smallest group size m")
      ->required()
      ->check(CLI::PositiveNumber);

  auto *rule = app->add_subcommand("rule", "Gauss-Hermite nodes and weights as CSV");
  rule->add_option("--k", c.rule.k, "Points per dimension")
      ->required()
      ->check(CLI::Range(1, kMaxHermiteOrder));
  rule->add_option("--dim", c.rule.dim, "Dimension of the product rule")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto *rate = app->add_subcommand("rate-check", "Empirical AQ error rate against a brute-force oracle");
  add_model_flags(rate, c.rate.model);
  rate->add_option("--k", c.rate.k, "Quadrature points (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  rate->add_option("--m-grid", c.rate.m_grid, "Group sizes (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  rate->add_option("--replicates", c.rate.replicates, "Simulated groups per m")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rate->add_option("--seed", c.rate.seed, "Random seed")->capture_default_str();
  rate->add_option("--csv", c.rate.csv, "Also write one CSV row per (k, m) here");

  auto *demo = app->add_subcommand("gq-demo", "Unadapted versus adaptive quadrature as m grows");
  add_model_flags(demo, c.demo.model);
  demo->add_option("--k", c.demo.k, "Quadrature points")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  demo->add_option("--m-grid", c.demo.m_grid, "Group sizes (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  demo->add_option("--replicates", c.demo.replicates, "Simulated groups per m")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  demo->add_option("--seed", c.demo.seed, "Random seed")->capture_default_str();
  demo->add_option("--csv", c.demo.csv, "Also write one CSV row per m here");

  auto *sim = app->add_subcommand("simulate", "Bernoulli random-intercept simulation study");
  SimStudyConfig &s = c.sim.config;
  sim->add_option("--groups", s.M, "Groups per dataset")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--group-size", s.m, "Observations per group")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--sigma", s.sigma_true, "True random-intercept SD")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--beta", s.beta_true, "True (intercept, x, t, x:t)")
      ->delimiter(',')
      ->expected(4)
      ->capture_default_str();
  sim->add_option("--replicates", s.replicates, "Simulated datasets")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--k", s.k_grid, "Quadrature points (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  sim->add_option("--method", c.sim.method, "aq or gq")
      ->check(CLI::IsMember({"aq", "gq"}))
      ->capture_default_str();
  sim->add_option("--seed", s.seed, "Random seed")->capture_default_str();
  sim->add_option("--csv", c.sim.csv, "Also write one CSV row per k here");
  return app;
}

// --- output helpers -----------------------------------------------------------

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec(const Eigen::VectorXd &v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

json mat(const Eigen::MatrixXd &m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
  return a;
}

std::string fmt(const char *f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string g17(double x) { return fmt("%.17g", x); }

void emit_error(std::ostream &err, const std::string &kind, const std::string &message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

void emit_warning(const Global &g, std::ostream &err, const std::string &message) {
  if (!g.quiet) err << json{{"warning", message}}.dump() << '\n';
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << text;
  if (!f) throw std::runtime_error(path + ": write failed");
}

// JSON to --out, else to stdout unless a table was printed instead.
void deliver(const Global &g, std::ostream &out, const json &j) {
  const std::string text = j.dump(2) + "\n";
  if (!g.out.empty())
    write_file(g.out, text);
  else if (!g.pretty)
    out << text;
}

// --- fit ------------------------------------------------------------------

json params_json(const ModelSpec &spec, const Parameters &p, const std::vector<std::string> &fixed) {
  const auto names = parameter_names(spec, fixed);
  json beta = json::object();
  for (int j = 0; j < spec.d; ++j) beta[fixed[j]] = num(p.beta(j));
  json resp = json::object();
  for (int j = 0; j < spec.response_param_count(); ++j) resp[names[spec.d + j]] = num(p.response(j));
  return json{{"beta", beta}, {"response", resp}, {"raneff", mat(p.raneff)}};
}

int run_fit(const Config &c, std::ostream &out, std::ostream &err) {
  const FitFlags &f = c.fit;
  const ResponseFamily family = *parse_response_family(f.family);
  const RaneffFamily raneff = *parse_raneff_family(f.raneff);

  const auto header = read_csv_header(f.data);
  CsvSchema schema;
  schema.group_col = f.group.empty() ? header.front() : f.group;
  schema.response_cols = !f.response.empty() ? f.response
                         : family == ResponseFamily::weibull_ph
                             ? std::vector<std::string>{"time", "status"}
                             : std::vector<std::string>{"y"};
  if (!f.fixed.empty()) {
    schema.fixed_cols = f.fixed;
  } else {
    schema.fixed_cols.clear();
    if (family != ResponseFamily::weibull_ph) schema.fixed_cols.push_back("1");
    for (const auto &h : header)
      if (h != schema.group_col &&
          std::find(schema.response_cols.begin(), schema.response_cols.end(), h) ==
              schema.response_cols.end())
        schema.fixed_cols.push_back(h);
  }
  schema.raneff_cols = f.raneff_cols.empty() ? std::vector<std::string>{"1"} : f.raneff_cols;

  const GroupedDataset data = read_csv(f.data, schema);
  const ModelSpec spec = spec_for(data, family, raneff);
  const DatasetSummary sum = summary(data);
  const Method method = *parse_method(f.method);

  int k = 0;
  std::optional<KRecommendation> rec;
  if (f.k == "auto") {
    if (method == Method::GQ)
      emit_warning(c.global, err,
                   "k(M, m) is a recommendation for adaptive quadrature; it is used here with "
                   "--method gq as requested");
    rec = recommend_k(sum.M, static_cast<std::uint64_t>(sum.m_min));
    if (rec->unbounded()) throw std::runtime_error("--k auto: " + rec->guidance());
    k = *rec->k;
  } else {
    k = std::stoi(f.k);
  }

  FitOptions opt;
  opt.method = method;
  opt.outer_tol = f.tol;
  opt.max_evals = f.max_evals;
  opt.transform = f.transform == "softplus" ? PositiveTransform::softplus : PositiveTransform::log;
  opt.compute_vcov = !f.no_vcov;
  const FitResult r = fit(data, spec, k, opt);

  json j;
  j["command"] = "fit";
  j["data"] = {{"path", f.data}, {"M", sum.M}, {"n", sum.n}, {"m_min", sum.m_min}, {"m_max", sum.m_max}};
  j["model"] = {{"family", f.family},         {"raneff", f.raneff},
                {"group", schema.group_col}, {"response", schema.response_cols},
                {"fixed", data.fixed_names()}, {"raneff_cols", data.raneff_names()}};
  j["k"] = r.k;
  j["k_source"] = rec ? "auto" : "user";
  if (rec) j["recommendation"] = {{"k", *rec->k}, {"rate_r", rec->rate_r}, {"eps_star", rec->eps_star}};
  j["method"] = std::string(to_string(r.method));
  j["params_hat"] = params_json(spec, r.params_hat, data.fixed_names());
  j["names"] = r.names;
  j["estimates"] = vec(r.estimates);
  j["log_scale"] = r.log_scale;
  j["std_errors"] = vec(r.std_errors);
  j["vcov"] = r.vcov ? mat(*r.vcov) : json(nullptr);
  j["loglik"] = num(r.loglik);
  j["n_loglik_evals"] = r.n_loglik_evals;
  j["converged"] = r.converged;
  j["wall_time"] = r.wall_time;
  const FitDiagnostics &d = r.diagnostics;
  j["diagnostics"] = {{"optimizer_iterations", d.optimizer_iterations},
                      {"simplex_used", d.simplex_used},
                      {"inner_iterations", d.inner_iterations},
                      {"jitter_count", d.jitter_count},
                      {"failed_evaluations", d.failed_evaluations},
                      {"hessian_evals", d.hessian_evals},
                      {"grad_inf_norm", num(d.grad_inf_norm)},
                      {"message", d.message}};
  std::vector<WaldInterval> ci;
  if (r.vcov) ci = wald_ci(r, f.level);
  json cij = json::array();
  for (const auto &w : ci)
    cij.push_back({{"name", w.name}, {"estimate", num(w.estimate)}, {"lower", num(w.lower)}, {"upper", num(w.upper)}});
  j["wald"] = {{"level", f.level}, {"intervals", r.vcov ? cij : json(nullptr)}};

  if (!r.converged) emit_warning(c.global, err, "fit did not converge: " + d.message);
  deliver(c.global, out, j);
  if (c.global.pretty) {
    out << "method " << to_string(r.method) << ", k = " << r.k << ", M = " << sum.M
        << ", n = " << sum.n << "\n";
    out << "log-likelihood " << fmt("%.6f", r.loglik) << (r.converged ? "" : " (not converged)")
        << "\n\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %12s %10s %12s %12s\n", "parameter", "estimate", "se",
                  "lower", "upper");
    out << line;
    for (std::size_t i = 0; i < r.names.size(); ++i) {
      const bool lg = r.log_scale[i];
      const std::string name = lg ? "log(" + r.names[i] + ")" : r.names[i];
      const double lo = ci.empty() ? NAN : (lg ? std::log(ci[i].lower) : ci[i].lower);
      const double hi = ci.empty() ? NAN : (lg ? std::log(ci[i].upper) : ci[i].upper);
      std::snprintf(line, sizeof line, "%-14s %12.5f %10.5f %12.5f %12.5f\n", name.c_str(),
                    r.estimates(static_cast<Eigen::Index>(i)),
                    r.std_errors(static_cast<Eigen::Index>(i)), lo, hi);
      out << line;
    }
  }
  return kOk;
}

// --- recommend-k ------------------------------------------------------------

int run_recommend(const Config &c, std::ostream &out) {
  const KRecommendation r = recommend_k(c.recommend.groups, c.recommend.min_group_size);
  json j;
  j["command"] = "recommend-k";
  j["M"] = r.M;
  j["m"] = r.m;
  j["k"] = r.k ? json(*r.k) : json("Unbounded");
  j["rate_r"] = r.k ? json(r.rate_r) : json(nullptr);
  j["eps_star"] = r.k ? json(r.eps_star) : json(nullptr);
  j["avoid_laplace"] = r.avoid_laplace();
  j["guidance"] = r.guidance();
  deliver(c.global, out, j);
  if (c.global.pretty) {
    if (r.k) {
      out << "k=" << *r.k << "\n";
      out << "r(k)=" << r.rate_r << "\n";
      out << "eps*(k)=" << fmt("%.6g", r.eps_star) << "\n";
    } else {
      out << "k=Unbounded\n";
    }
    out << r.guidance() << "\n";
  }
  return kOk;
}

// --- rule -------------------------------------------------------------------

int run_rule(const Config &c, std::ostream &out) {
  if (std::pow(double(c.rule.k), double(c.rule.dim)) > double(kMaxProductNodes))
    throw UsageError("--k ^ --dim exceeds " + std::to_string(kMaxProductNodes) + " nodes");
  const QuadratureRule rule = gauss_hermite(c.rule.k, c.rule.dim);
  std::ostringstream s;
  for (int j = 0; j < rule.dim(); ++j) s << "z" << (j + 1) << ",";
  s << "weight\n";
  for (std::size_t i = 0; i < rule.size(); ++i) {
    for (int j = 0; j < rule.dim(); ++j) s << g17(rule.point(i)(j)) << ",";
    s << g17(rule.kernel_weight(i)) << "\n";
  }
  if (c.global.out.empty())
    out << s.str();
  else
    write_file(c.global.out, s.str());
  return kOk;
}

// --- theory checks --------------------------------------------------------------

std::pair<ModelSpec, Parameters> model_from(const ModelFlags &m) {
  ModelSpec spec;
  spec.response = *parse_response_family(m.family);
  spec.raneff = *parse_raneff_family(m.raneff);
  spec.d = static_cast<int>(m.beta.size());
  spec.p = 1;
  spec.validate();
  Parameters p = Parameters::defaults(spec);
  p.beta = Eigen::Map<const Eigen::VectorXd>(m.beta.data(), spec.d);
  if (!m.dispersion.empty()) {
    if (static_cast<int>(m.dispersion.size()) != spec.response_param_count())
      throw UsageError("--dispersion needs " + std::to_string(spec.response_param_count()) +
                       " value(s) for " + m.family);
    p.response = Eigen::Map<const Eigen::VectorXd>(m.dispersion.data(), spec.response_param_count());
  }
  p.raneff(0, 0) = m.variance;
  validate_parameters(spec, p);
  return {spec, p};
}

json model_json(const ModelFlags &m, const ModelSpec &spec, const Parameters &p) {
  return {{"family", m.family},
          {"raneff", m.raneff},
          {"beta", vec(p.beta)},
          {"dispersion", vec(p.response)},
          {"variance", p.raneff(0, 0)},
          {"d", spec.d}};
}

int run_rate(const Config &c, std::ostream &out) {
  const RateFlags &f = c.rate;
  const auto [spec, params] = model_from(f.model);
  const auto reports = rate_check(spec, params, f.k, f.m_grid, f.replicates, f.seed);
  json j;
  j["command"] = "rate-check";
  j["model"] = model_json(f.model, spec, params);
  j["m_grid"] = f.m_grid;
  j["replicates"] = f.replicates;
  j["seed"] = f.seed;
  json reps = json::array();
  std::ostringstream csv;
  csv << "k,m,median_error,at_noise_floor\n";
  for (const auto &r : reports) {
    json rows = json::array();
    for (const auto &row : r.rows) {
      rows.push_back({{"m", row.m}, {"median_error", num(row.median_error)}, {"at_noise_floor", row.at_noise_floor}});
      csv << r.k << "," << row.m << "," << g17(row.median_error) << "," << (row.at_noise_floor ? 1 : 0) << "\n";
    }
    reps.push_back({{"k", r.k},
                    {"expected_slope", r.expected_slope},
                    {"slope", r.slope ? num(*r.slope) : json(nullptr)},
                    {"log_C", r.log_C ? num(*r.log_C) : json(nullptr)},
                    {"note", r.note},
                    {"rows", rows}});
  }
  j["reports"] = reps;
  if (!f.csv.empty()) write_file(f.csv, csv.str());
  deliver(c.global, out, j);
  if (c.global.pretty) {
    for (const auto &r : reports) {
      out << "k = " << r.k << ": slope "
          << (r.slope ? fmt("%.3f", *r.slope) : std::string("n/a")) << " (expected "
          << r.expected_slope << ")" << (r.note.empty() ? "" : "  " + r.note) << "\n";
      for (const auto &row : r.rows)
        out << fmt("  m = %6.0f", row.m) << fmt("  median error %.3e", row.median_error)
            << (row.at_noise_floor ? "  (noise floor)" : "") << "\n";
    }
  }
  return kOk;
}

int run_demo(const Config &c, std::ostream &out) {
  const DemoFlags &f = c.demo;
  const auto [spec, params] = model_from(f.model);
  const auto r = gq_divergence_demo(spec, params, f.k, f.m_grid, f.replicates, f.seed);
  json j;
  j["command"] = "gq-demo";
  j["model"] = model_json(f.model, spec, params);
  j["k"] = r.k;
  j["replicates"] = r.replicates;
  j["seed"] = r.seed;
  json rows = json::array();
  std::ostringstream csv;
  csv << "m,gq_median_rel_error,gq_fraction_below_half,aq_median_rel_error,aq_fraction_below_half\n";
  for (const auto &row : r.rows) {
    rows.push_back({{"m", row.m},
                    {"gq_median_rel_error", num(row.gq_median_rel_error)},
                    {"gq_fraction_below_half", row.gq_fraction_below_half},
                    {"aq_median_rel_error", num(row.aq_median_rel_error)},
                    {"aq_fraction_below_half", row.aq_fraction_below_half}});
    csv << row.m << "," << g17(row.gq_median_rel_error) << "," << g17(row.gq_fraction_below_half)
        << "," << g17(row.aq_median_rel_error) << "," << g17(row.aq_fraction_below_half) << "\n";
  }
  j["rows"] = rows;
  if (!f.csv.empty()) write_file(f.csv, csv.str());
  deliver(c.global, out, j);
  if (c.global.pretty) {
    out << "       m   GQ median  GQ < 1/2   AQ median  AQ < 1/2\n";
    for (const auto &row : r.rows)
      out << fmt("%8.0f", row.m) << fmt("  %10.3e", row.gq_median_rel_error)
          << fmt("  %8.3f", row.gq_fraction_below_half) << fmt("  %10.3e", row.aq_median_rel_error)
          << fmt("  %8.3f", row.aq_fraction_below_half) << "\n";
  }
  return kOk;
}

json quantiles_json(const Quantiles &q) {
  return {{"q025", num(q.q025)}, {"q50", num(q.q50)}, {"q975", num(q.q975)}};
}

int run_simulate(const Config &c, std::ostream &out) {
  SimStudyConfig cfg = c.sim.config;
  cfg.method = *parse_method(c.sim.method);
  const SimStudyReport r = simulate_study(cfg);
  json j;
  j["command"] = "simulate";
  j["config"] = {{"M", cfg.M},
                 {"m", cfg.m},
                 {"sigma_true", cfg.sigma_true},
                 {"beta_true", cfg.beta_true},
                 {"replicates", cfg.replicates},
                 {"k_grid", cfg.k_grid},
                 {"seed", cfg.seed},
                 {"method", std::string(to_string(cfg.method))}};
  json per_k = json::array();
  std::ostringstream csv;
  csv << "k,n_ok,failures,beta0_err_q025,beta0_err_q50,beta0_err_q975,sigma_err_q025,"
         "sigma_err_q50,sigma_err_q975,beta0_coverage,wall_time_mean,wall_time_sd,evals_mean,"
         "evals_sd\n";
  for (const auto &s : r.per_k) {
    per_k.push_back({{"k", s.k},
                     {"n_ok", s.n_ok},
                     {"failures", s.failures},
                     {"beta0_abs_error", quantiles_json(s.beta0_abs_error)},
                     {"sigma_abs_error", quantiles_json(s.sigma_abs_error)},
                     {"beta0_coverage", num(s.beta0_coverage)},
                     {"wall_time_mean", s.wall_time_mean},
                     {"wall_time_sd", s.wall_time_sd},
                     {"evals_mean", num(s.evals_mean)},
                     {"evals_sd", num(s.evals_sd)}});
    csv << s.k << "," << s.n_ok << "," << s.failures;
    for (double x : {s.beta0_abs_error.q025, s.beta0_abs_error.q50, s.beta0_abs_error.q975,
                     s.sigma_abs_error.q025, s.sigma_abs_error.q50, s.sigma_abs_error.q975,
                     s.beta0_coverage, s.wall_time_mean, s.wall_time_sd, s.evals_mean, s.evals_sd})
      csv << "," << g17(x);
    csv << "\n";
  }
  j["per_k"] = per_k;
  json reps = json::array();
  for (const auto &x : r.replicates)
    reps.push_back({{"replicate", x.replicate},
                    {"k", x.k},
                    {"ok", x.ok},
                    {"error", x.error},
                    {"beta0_hat", num(x.beta0_hat)},
                    {"beta0_se", num(x.beta0_se)},
                    {"sigma_hat", num(x.sigma_hat)},
                    {"covered", x.covered},
                    {"wall_time", x.wall_time},
                    {"n_loglik_evals", x.n_loglik_evals}});
  j["replicates"] = reps;
  if (!c.sim.csv.empty()) write_file(c.sim.csv, csv.str());
  deliver(c.global, out, j);
  if (c.global.pretty) {
    out << "   k   ok  |b0 err| median  sigma err median  coverage  evals mean\n";
    for (const auto &s : r.per_k)
      out << fmt("%4.0f", s.k) << fmt("  %3.0f", s.n_ok) << fmt("  %15.4f", s.beta0_abs_error.q50)
          << fmt("  %16.4f", s.sigma_abs_error.q50) << fmt("  %8.3f", s.beta0_coverage)
          << fmt("  %10.1f", s.evals_mean) << "\n";
  }
  return kOk;
}

} // namespace

std::string help(const std::string &subcommand) {
  Config c;
  auto app = build_app(c);
  if (subcommand.empty()) return app->help();
  return app->get_subcommand(subcommand)->help();
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Config c;
  auto app = build_app(c);
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app->parse(rev);
  } catch (const CLI::CallForHelp &) {
    const auto subs = app->get_subcommands();
    out << (subs.empty() ? app->help() : subs.front()->help());
    return kOk;
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) return kOk;
    emit_error(err, "usage", e.what());
    return kUsage;
  }

  const std::string name = app->get_subcommands().front()->get_name();
  try {
    if (c.global.threads > 0) set_num_threads(c.global.threads);
    if (name == "fit") return run_fit(c, out, err);
    if (name == "recommend-k") return run_recommend(c, out);
    if (name == "rule") return run_rule(c, out);
    if (name == "rate-check") return run_rate(c, out);
    if (name == "gq-demo") return run_demo(c, out);
    return run_simulate(c, out);
  } catch (const UsageError &e) {
    emit_error(err, "usage", e.what());
    return kUsage;
  } catch (const ParseError &e) {
    emit_error(err, "data", e.what());
  } catch (const ModelError &e) {
    emit_error(err, "model", e.what());
  } catch (const std::invalid_argument &e) {
    emit_error(err, "invalid_argument", e.what());
  } catch (const std::exception &e) {
    emit_error(err, "runtime", e.what());
  }
  return kRuntime;
}

int run(int argc, const char *const *argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace aghq::cli
