// SPDX-License-Identifier: Apache-2.0
#include "evattr/uncertainty.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "evattr/errors.hpp"
#include "evattr/optim.hpp"

namespace evattr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLog2 = 0.6931471805599453;
constexpr double kXiLower = -1.0;
constexpr double kXiUpper = 2.0;

FitConfig with_mode(const FitConfig& base, CovariateMode mode) {
  FitConfig cfg = base;
  cfg.covariate_mode = mode;
  return cfg;
}

/// Standard normal quantile (Acklam's rational approximation); the
/// conventional 1.96 is returned verbatim for the 95% level.
double normal_quantile(double p) {
  if (p == 0.975) return 1.96;
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidInputError("normal quantile level must lie in (0, 1)");
  }
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

}  // namespace

std::string to_string(IntervalMethod m) {
  switch (m) {
    case IntervalMethod::Delta:
      return "delta";
    case IntervalMethod::Bootstrap:
      return "bootstrap";
    case IntervalMethod::LrtPcOnly:
      return "lrt_pc_only";
    case IntervalMethod::LrtJoint:
      return "lrt_joint";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Delta method

IntervalResult delta_interval(const AttributionResult& attr) {
  if (attr.p_C == 0.0) {
    throw MethodInapplicableError(
        "delta method is undefined when the counterfactual probability is zero");
  }
  const FitResult& fa = attr.actual_fit;
  const FitResult& fc = attr.counterfactual_fit;
  if (!fa.converged || !fc.converged) {
    throw MethodInapplicableError("delta method requires converged fits");
  }
  const std::size_t na = static_cast<std::size_t>(fa.n_free());
  const std::size_t nc = static_cast<std::size_t>(fc.n_free());
  if (fa.covariance.rows() != static_cast<Eigen::Index>(na) ||
      fc.covariance.rows() != static_cast<Eigen::Index>(nc)) {
    throw MethodInapplicableError("fit covariance has the wrong dimension");
  }

  const double p_O = attr.p_O;
  const std::vector<double> x_event =
      fa.params.is_stationary() ? std::vector<double>{}
                                : std::vector<double>{attr.covariate_at_event};
  const std::size_t n_beta_a = fa.params.beta.size();
  const std::size_t n_beta_c = fc.params.beta.size();

  // theta -> ln RR through steps 2-4 of the pipeline at fixed p_O.
  const auto f = [&](std::span<const double> theta) -> double {
    evd::EVDParams pa, pc;
    pa.beta.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n_beta_a));
    pa.sigma = theta[n_beta_a];
    pa.xi = theta[n_beta_a + 1];
    const std::size_t off = na;
    pc.beta.assign(theta.begin() + static_cast<std::ptrdiff_t>(off),
                   theta.begin() + static_cast<std::ptrdiff_t>(off + n_beta_c));
    pc.sigma = theta[off + n_beta_c];
    pc.xi = theta[off + n_beta_c + 1];
    if (!(pa.sigma > 0.0) || !(pc.sigma > 0.0)) return kInf;
    const double z = evd::gev_return_level(p_O, pa, x_event);
    const double log_pc = evd::gev_log_survival(z, pc);
    if (!std::isfinite(log_pc)) return kInf;
    return std::log(p_O) - log_pc;
  };

  std::vector<double> theta(fa.params.beta);
  theta.push_back(fa.params.sigma);
  theta.push_back(fa.params.xi);
  theta.insert(theta.end(), fc.params.beta.begin(), fc.params.beta.end());
  theta.push_back(fc.params.sigma);
  theta.push_back(fc.params.xi);

  const auto g_full = optim::central_gradient(f, theta, 1e-5, 1e-7);
  const auto g_half = optim::central_gradient(f, theta, 5e-6, 5e-8);

  double grad_check = 0.0;
  bool grad_finite = true;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    grad_finite = grad_finite && std::isfinite(g_full[i]) && std::isfinite(g_half[i]);
    const double denom = std::max({std::abs(g_full[i]), std::abs(g_half[i]), 1e-7});
    grad_check = std::max(grad_check, std::abs(g_full[i] - g_half[i]) / denom);
  }

  IntervalResult out;
  out.method = IntervalMethod::Delta;
  out.point_log2 = attr.log2_rr;
  out.gradient_check = grad_check;
  if (!grad_finite) {
    out.lower = -kInf;
    out.upper = kInf;
    out.se_log2 = kInf;
    out.unreliable = true;
    out.notes = "gradient not finite near the support boundary";
    return out;
  }

  Eigen::VectorXd g(static_cast<Eigen::Index>(theta.size()));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    g[static_cast<Eigen::Index>(i)] = g_half[i];
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(g.size(), g.size());
  cov.topLeftCorner(static_cast<Eigen::Index>(na), static_cast<Eigen::Index>(na)) =
      fa.covariance;
  cov.bottomRightCorner(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(nc)) =
      fc.covariance;

  const double var_ln = std::max(0.0, g.dot(cov * g));
  out.se_log2 = std::sqrt(var_ln) / kLog2;
  const double zcrit = normal_quantile(0.5 + out.level / 2.0);
  out.lower = out.point_log2 - zcrit * out.se_log2;
  out.upper = out.point_log2 + zcrit * out.se_log2;
  std::ostringstream notes;
  if (fa.diagnostics.find("pseudo") != std::string::npos ||
      fc.diagnostics.find("pseudo") != std::string::npos) {
    out.unreliable = true;
    notes << "near-singular fit covariance;";
  }
  out.notes = notes.str();
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap

namespace {

struct ReplicateOutcome {
  enum class Kind { Finite, Infinite, Failed } kind{Kind::Failed};
  double log2_rr{};
};

ScenarioSeries resample_shared(const ScenarioSeries& series, const BootstrapConfig& cfg,
                               std::mt19937_64& rng) {
  const std::size_t m_count = static_cast<std::size_t>(series.members);
  const std::size_t y_count = series.year_count();
  std::vector<std::size_t> member_idx(m_count), year_idx(y_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    member_idx[m] = cfg.resample_members ? draw_index(rng, m_count) : m;
  }
  for (std::size_t t = 0; t < y_count; ++t) {
    year_idx[t] = cfg.resample_years ? draw_index(rng, y_count) : t;
  }

  ScenarioSeries out;
  out.scenario = series.scenario;
  out.years = series.years;  // positional labels; covariate carries the pairing
  out.members = series.members;
  out.values.resize(series.values.size());
  for (std::size_t m = 0; m < m_count; ++m) {
    for (std::size_t t = 0; t < y_count; ++t) {
      out.value(static_cast<int>(m), t) =
          series.value(static_cast<int>(member_idx[m]), year_idx[t]);
    }
  }
  if (series.covariate) {
    std::vector<double> cov(y_count);
    for (std::size_t t = 0; t < y_count; ++t) cov[t] = (*series.covariate)[year_idx[t]];
    out.covariate = std::move(cov);
  }
  return out;
}

/// Per-member year resampling cannot be expressed as a ScenarioSeries
/// (members stop sharing a covariate column), so it fits on a set with
/// one single-observation block per (member, year) draw.
FitResult fit_per_member_resample(const ScenarioSeries& series, const BootstrapConfig& cfg,
                                  CovariateMode mode, const FitConfig& fit_config,
                                  std::mt19937_64& rng) {
  const std::size_t m_count = static_cast<std::size_t>(series.members);
  const std::size_t y_count = series.year_count();

  std::vector<std::size_t> member_idx(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    member_idx[m] = cfg.resample_members ? draw_index(rng, m_count) : m;
  }
  std::vector<std::vector<std::size_t>> year_idx(m_count, std::vector<std::size_t>(y_count));
  for (std::size_t m = 0; m < m_count; ++m) {
    for (std::size_t t = 0; t < y_count; ++t) {
      year_idx[m][t] = cfg.resample_years ? draw_index(rng, y_count) : t;
    }
  }

  std::vector<double> pooled;
  pooled.reserve(m_count * y_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    for (std::size_t t = 0; t < y_count; ++t) {
      pooled.push_back(series.value(static_cast<int>(member_idx[m]), year_idx[m][t]));
    }
  }
  const double u = empirical_quantile(pooled, fit_config.threshold_quantile);

  evd::ExceedanceSet set;
  set.threshold = u;
  set.n_per_year = static_cast<double>(series.members);
  set.years.reserve(m_count * y_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    for (std::size_t t = 0; t < y_count; ++t) {
      evd::YearBlock block;
      block.year = series.years[t];
      block.n_obs = 1;
      if (mode == CovariateMode::LinearInCovariate) {
        block.x = {(*series.covariate)[year_idx[m][t]]};
      }
      const double v = series.value(static_cast<int>(member_idx[m]), year_idx[m][t]);
      set.years.push_back(std::move(block));
      if (v > u) {
        set.exceedances.push_back({v, set.years.size() - 1});
      }
    }
  }

  std::vector<double> block_max(y_count, -kInf);
  for (std::size_t m = 0; m < m_count; ++m) {
    for (std::size_t t = 0; t < y_count; ++t) {
      const std::size_t i = m * y_count + t;
      block_max[t] = std::max(block_max[t], pooled[i] - u);
    }
  }
  double mean = 0.0;
  for (double v : block_max) mean += v;
  mean /= static_cast<double>(y_count);
  double var = 0.0;
  for (double v : block_max) var += (v - mean) * (v - mean);
  var /= std::max<std::size_t>(y_count - 1, 1);

  evd::EVDParams start;
  start.beta.assign(mode == CovariateMode::LinearInCovariate ? 2 : 1, 0.0);
  start.beta[0] = mean + u;
  start.sigma = std::max(std::sqrt(var * 6.0) / 3.141592653589793, 1e-8);
  start.xi = -0.1;
  return fit_pp(set, fit_config, start);
}

}  // namespace

IntervalResult bootstrap_interval(double p_O, int event_year, const ScenarioSeries& actual,
                                  const ScenarioSeries& counterfactual,
                                  const PipelineConfig& config,
                                  const BootstrapConfig& bootstrap) {
  if (!(p_O > 0.0 && p_O < 1.0)) {
    throw InvalidInputError("p_O must lie in (0, 1)");
  }
  if (bootstrap.replicates < 2) {
    throw InvalidInputError("bootstrap needs at least 2 replicates");
  }

  const FitConfig cfg_a = with_mode(config.fit, config.actual_mode);
  const FitConfig cfg_c = with_mode(config.fit, config.counterfactual_mode);
  const FitResult fit_a = fit_pp(actual, cfg_a);
  const FitResult fit_c = fit_pp(counterfactual, cfg_c);
  if (!fit_a.converged || !fit_c.converged) {
    throw FitError("bootstrap requires converged fits of the original data");
  }

  const std::vector<double> x_event =
      config.actual_mode == CovariateMode::LinearInCovariate
          ? std::vector<double>{actual.covariate_at(event_year)}
          : std::vector<double>{};
  const double z_a = evd::gev_return_level(p_O, fit_a.params, x_event);
  const double p_c = evd::gev_exceedance_prob(z_a, fit_c.params);
  const double point = make_risk_ratio(p_O, p_c).log2_rr;
  if (!std::isfinite(point)) {
    throw MethodInapplicableError(
        "bootstrap interval is undefined when the point estimate is infinite");
  }

  const int B = bootstrap.replicates;
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(B));

  const auto run_replicate = [&](int b) {
    std::mt19937_64 rng(mix_seed(bootstrap.seed, static_cast<std::uint64_t>(b)));
    ReplicateOutcome& slot = outcomes[static_cast<std::size_t>(b)];
    try {
      FitResult fa, fc;
      if (bootstrap.per_member_years) {
        fa = fit_per_member_resample(actual, bootstrap, config.actual_mode, cfg_a, rng);
        fc = fit_per_member_resample(counterfactual, bootstrap, config.counterfactual_mode,
                                     cfg_c, rng);
      } else {
        fa = fit_pp(resample_shared(actual, bootstrap, rng), cfg_a);
        fc = fit_pp(resample_shared(counterfactual, bootstrap, rng), cfg_c);
      }
      if (!fa.converged || !fc.converged) {
        slot.kind = ReplicateOutcome::Kind::Failed;
        return;
      }
      const double z_b = evd::gev_return_level(p_O, fa.params, x_event);
      const double p_b = evd::gev_exceedance_prob(z_b, fc.params);
      if (p_b == 0.0) {
        slot.kind = ReplicateOutcome::Kind::Infinite;
        return;
      }
      slot.kind = ReplicateOutcome::Kind::Finite;
      slot.log2_rr = make_risk_ratio(p_O, p_b).log2_rr;
    } catch (const Error&) {
      slot.kind = ReplicateOutcome::Kind::Failed;
    }
  };

  const int threads = std::max(1, bootstrap.threads);
  if (threads == 1) {
    for (int b = 0; b < B; ++b) run_replicate(b);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    std::atomic<int> next{0};
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (int b = next.fetch_add(1); b < B; b = next.fetch_add(1)) run_replicate(b);
      });
    }
    for (auto& t : pool) t.join();
  }

  IntervalResult out;
  out.method = IntervalMethod::Bootstrap;
  out.level = bootstrap.level;
  out.point_log2 = point;

  std::vector<double> finite;
  finite.reserve(static_cast<std::size_t>(B));
  for (const auto& o : outcomes) {
    switch (o.kind) {
      case ReplicateOutcome::Kind::Finite:
        finite.push_back(o.log2_rr);
        break;
      case ReplicateOutcome::Kind::Infinite:
        ++out.n_infinite;
        break;
      case ReplicateOutcome::Kind::Failed:
        ++out.n_failed;
        break;
    }
  }
  if (out.n_failed > bootstrap.max_failure_fraction * B) {
    throw FitError(std::to_string(out.n_failed) + " of the " + std::to_string(B) +
                   " bootstrap refits failed");
  }
  if (finite.empty()) {
    throw MethodInapplicableError("all " + std::to_string(B) +
                                  " bootstrap replicates had infinite risk ratio");
  }

  const double alpha = 1.0 - bootstrap.level;
  const double q_lo = empirical_quantile(finite, alpha / 2.0);
  const double q_hi = empirical_quantile(finite, 1.0 - alpha / 2.0);
  out.lower = 2.0 * point - q_hi;
  out.upper = 2.0 * point - q_lo;
  out.unreliable = out.n_infinite > 0.10 * B;

  std::ostringstream notes;
  if (out.n_infinite > 0) {
    notes << out.n_infinite << " of the " << B
          << " bootstrap samples are excluded (infinite risk ratio estimate)";
    if (out.unreliable) notes << "; interval unreliable";
    notes << ";";
  }
  if (out.n_failed > 0) {
    notes << out.n_failed << " refits failed and were excluded;";
  }
  out.notes = notes.str();
  return out;
}

// ---------------------------------------------------------------------------
// LRT inversion

LrtProblem::LrtProblem(const ScenarioSeries& actual, const ScenarioSeries& counterfactual,
                       double p_A, int event_year, const PipelineConfig& config,
                       LrtMode mode)
    : LrtProblem(actual, counterfactual, p_A, event_year, config, mode,
                 fit_pp(actual, with_mode(config.fit, config.actual_mode)),
                 fit_pp(counterfactual, with_mode(config.fit, config.counterfactual_mode))) {}

LrtProblem::LrtProblem(const ScenarioSeries& actual, const ScenarioSeries& counterfactual,
                       double p_A, int event_year, const PipelineConfig& config,
                       LrtMode mode, FitResult actual_fit, FitResult counterfactual_fit)
    : actual_set_(make_exceedance_set(actual, actual_fit.threshold, config.actual_mode)),
      cf_set_(make_exceedance_set(counterfactual, counterfactual_fit.threshold,
                                  config.counterfactual_mode)),
      x_event_(config.actual_mode == CovariateMode::LinearInCovariate
                   ? std::vector<double>{actual.covariate_at(event_year)}
                   : std::vector<double>{}),
      p_a_(p_A),
      fit_config_(config.fit),
      mode_(mode),
      actual_params_(actual_fit.params),
      cf_params_(counterfactual_fit.params),
      ll_fits_converged_(actual_fit.converged && counterfactual_fit.converged) {
  initialize();
}

LrtProblem::LrtProblem(evd::ExceedanceSet actual, evd::ExceedanceSet counterfactual,
                       std::vector<double> x_event, double p_A, const FitConfig& fit_config,
                       LrtMode mode, FitResult actual_fit, FitResult counterfactual_fit)
    : actual_set_(std::move(actual)),
      cf_set_(std::move(counterfactual)),
      x_event_(std::move(x_event)),
      p_a_(p_A),
      fit_config_(fit_config),
      mode_(mode),
      actual_params_(actual_fit.params),
      cf_params_(counterfactual_fit.params),
      ll_fits_converged_(actual_fit.converged && counterfactual_fit.converged) {
  initialize();
}

void LrtProblem::initialize() {
  if (!(p_a_ > 0.0 && p_a_ < 1.0)) {
    throw InvalidInputError("p_A must lie in (0, 1)");
  }
  if (!ll_fits_converged_) {
    throw FitError("LRT requires converged unconstrained fits");
  }
  if (!cf_params_.is_stationary()) {
    throw InvalidInputError("the LRT constraint requires a stationary counterfactual model");
  }
  actual_set_.validate();
  cf_set_.validate();
  ll_actual_ = pp_log_likelihood(actual_set_, actual_params_, fit_config_.gumbel_tolerance);
  ll_cf_ = pp_log_likelihood(cf_set_, cf_params_, fit_config_.gumbel_tolerance);
  if (!std::isfinite(ll_actual_) || !std::isfinite(ll_cf_)) {
    throw FitError("unconstrained likelihood is not finite at the fitted parameters");
  }
  z_a_hat_ = evd::gev_return_level(p_a_, actual_params_, x_event_);
  p_c_hat_ = evd::gev_exceedance_prob(z_a_hat_, cf_params_);
}

double LrtProblem::point_rr() const {
  return p_c_hat_ > 0.0 ? p_a_ / p_c_hat_ : kInf;
}

double LrtProblem::point_log2_rr() const {
  return make_risk_ratio(p_a_, p_c_hat_).log2_rr;
}

double LrtProblem::constrained_max_loglik(double r0) {
  const double p_c0 = p_a_ / r0;
  const double gumbel_tol = fit_config_.gumbel_tolerance;

  const bool joint = mode_ == LrtMode::Joint;
  const std::size_t n_beta_a = actual_params_.beta.size();
  const std::size_t dim = joint ? n_beta_a + 4 : 2;

  const auto objective = [&](std::span<const double> phi) -> double {
    double z_a;
    evd::EVDParams pa;
    std::size_t off = 0;
    if (joint) {
      pa.beta.assign(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(n_beta_a));
      const double log_sigma_a = phi[n_beta_a];
      const double xi_a = phi[n_beta_a + 1];
      if (std::abs(log_sigma_a) > 50.0 || xi_a <= kXiLower || xi_a >= kXiUpper) return kInf;
      pa.sigma = std::exp(log_sigma_a);
      pa.xi = xi_a;
      z_a = evd::gev_return_level(p_a_, pa, x_event_, gumbel_tol);
      off = n_beta_a + 2;
    } else {
      z_a = z_a_hat_;
    }
    const double log_sigma_c = phi[off];
    const double xi_c = phi[off + 1];
    if (std::abs(log_sigma_c) > 50.0 || xi_c <= kXiLower || xi_c >= kXiUpper) return kInf;
    const double sigma_c = std::exp(log_sigma_c);
    // The location that places the counterfactual return level of
    // p_A / r0 exactly at z_A: the nonzero-shape and Gumbel branches both
    // come from the return-level formula itself.
    const double mu_c =
        z_a - evd::return_level_offset(p_c0, sigma_c, xi_c, gumbel_tol);
    if (!std::isfinite(mu_c)) return kInf;
    const evd::EVDParams pc = evd::EVDParams::stationary(mu_c, sigma_c, xi_c);

    double ll = pp_log_likelihood(cf_set_, pc, gumbel_tol);
    if (joint && std::isfinite(ll)) {
      ll += pp_log_likelihood(actual_set_, pa, gumbel_tol);
    }
    return std::isfinite(ll) ? -ll : kInf;
  };

  std::vector<double> start, step;
  if (joint) {
    start.assign(actual_params_.beta.begin(), actual_params_.beta.end());
    start.push_back(std::log(actual_params_.sigma));
    start.push_back(actual_params_.xi);
    for (std::size_t i = 0; i < n_beta_a; ++i) step.push_back(0.25 * actual_params_.sigma);
    step.push_back(0.15);
    step.push_back(0.04);
  }
  start.push_back(std::log(cf_params_.sigma));
  start.push_back(cf_params_.xi);
  step.push_back(0.15);
  step.push_back(0.04);

  // The MLE values of (sigma_C, xi_C) can be infeasible under the
  // constraint (the pinned location may drag the upper endpoint below the
  // observed maximum); widen the scale and soften the shape until the
  // likelihood is finite.
  if (!std::isfinite(objective(start))) {
    const std::size_t off = joint ? n_beta_a + 2 : 0;
    bool found = false;
    for (double scale : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      for (double xi_c : {cf_params_.xi, 0.5 * cf_params_.xi, -0.05, 0.05, -0.3, 0.3}) {
        auto trial = start;
        trial[off] += std::log(scale);
        trial[off + 1] = xi_c;
        if (std::isfinite(objective(trial))) {
          start = std::move(trial);
          found = true;
          break;
        }
      }
      if (found) break;
    }
    if (!found) {
      throw FitError("no feasible start for the constrained fit at r0 = " +
                     std::to_string(r0));
    }
  }

  optim::NelderMeadOptions nm;
  nm.max_iterations = fit_config_.max_iterations;
  nm.f_tolerance = 1e-11;
  auto best = optim::nelder_mead(objective, start, step, nm);
  evaluations_ += best.evaluations;
  auto retry = optim::nelder_mead(objective, best.x,
                                  std::vector<double>(dim, 0.02), nm);
  evaluations_ += retry.evaluations;
  if (retry.f < best.f) best = std::move(retry);
  auto polished = optim::bfgs_polish(objective, best.x);
  evaluations_ += polished.evaluations;
  if (std::isfinite(polished.f) && polished.f <= best.f) best = std::move(polished);

  if (!std::isfinite(best.f)) {
    throw FitError("constrained optimization failed at r0 = " + std::to_string(r0));
  }
  return -best.f;
}

double LrtProblem::statistic(double r0) {
  if (!(r0 > 0.0)) {
    throw InvalidInputError("r0 must be positive");
  }
  if (!(p_a_ / r0 < 1.0)) {
    throw InvalidInputError("p_A / r0 must be below 1");
  }

  const double ll_con = constrained_max_loglik(r0);
  double ll_unc = mode_ == LrtMode::Joint ? ll_actual_ + ll_cf_ : ll_cf_;
  double lambda = 2.0 * (ll_unc - ll_con);

  if (lambda < 0.0) {
    // The constrained optimum found a better point than the stored MLEs;
    // lifting the constraint can only improve it further, so re-polish
    // the unconstrained side from here and absorb the gain.
    if (mode_ == LrtMode::Joint) {
      const FitResult fa = fit_pp(actual_set_, fit_config_, actual_params_);
      const double ll_a = pp_log_likelihood(actual_set_, fa.params, fit_config_.gumbel_tolerance);
      if (ll_a > ll_actual_) {
        ll_actual_ = ll_a;
        actual_params_ = fa.params;
      }
    }
    const FitResult fc = fit_pp(cf_set_, fit_config_, cf_params_);
    const double ll_c = pp_log_likelihood(cf_set_, fc.params, fit_config_.gumbel_tolerance);
    if (ll_c > ll_cf_) {
      ll_cf_ = ll_c;
      cf_params_ = fc.params;
    }
    z_a_hat_ = evd::gev_return_level(p_a_, actual_params_, x_event_);
    p_c_hat_ = evd::gev_exceedance_prob(z_a_hat_, cf_params_);
    ll_unc = mode_ == LrtMode::Joint ? ll_actual_ + ll_cf_ : ll_cf_;
    lambda = 2.0 * (ll_unc - ll_con);
  }
  if (lambda < 0.0) {
    const double scale = std::max(1.0, std::abs(ll_unc));
    if (lambda < -1e-2 * scale) {
      throw Error("likelihood ratio statistic is negative (" + std::to_string(lambda) +
                  "): constrained optimum beat the unconstrained fit");
    }
    lambda = 0.0;
  }
  return lambda;
}

double lrt_statistic(double r0, double p_A, const ScenarioSeries& actual,
                     const ScenarioSeries& counterfactual, int event_year,
                     const PipelineConfig& config, LrtMode mode) {
  LrtProblem problem(actual, counterfactual, p_A, event_year, config, mode);
  return problem.statistic(r0);
}

IntervalResult lrt_lower_bound(LrtProblem& problem, const LRTConfig& config) {
  const double crit = config.chisq_crit;
  IntervalResult out;
  out.method = problem.mode() == LrtMode::Joint ? IntervalMethod::LrtJoint
                                                : IntervalMethod::LrtPcOnly;
  out.level = config.level;
  out.upper = kInf;
  out.point_log2 = problem.point_log2_rr();

  const double point_rr = problem.point_rr();
  std::ostringstream notes;

  double r_hi;
  if (std::isfinite(point_rr)) {
    r_hi = point_rr;
    double lambda_hi = problem.statistic(r_hi);
    int widen = 0;
    while (lambda_hi > crit && widen++ < 4) {
      r_hi *= 2.0;
      lambda_hi = problem.statistic(r_hi);
    }
    if (lambda_hi > crit) {
      throw BracketError("lambda exceeds the critical value at the point estimate");
    }
  } else {
    r_hi = std::exp2(config.log2_cap);
    if (problem.statistic(r_hi) > crit) {
      throw BracketError(
          "lambda exceeds the critical value at the bracket cap; increase log2_cap");
    }
    notes << "infinite point estimate, bracketed at cap;";
  }

  const double floor_r =
      std::max(std::exp2(config.log2_floor), problem.p_A() * (1.0 + 1e-9));
  double r_lo = std::min(1.0, r_hi / 2.0);
  r_lo = std::max(r_lo, floor_r);
  double lambda_lo = problem.statistic(r_lo);
  while (lambda_lo <= crit && r_lo > floor_r) {
    r_lo = std::max(floor_r, r_lo / 4.0);
    lambda_lo = problem.statistic(r_lo);
  }
  if (lambda_lo <= crit) {
    out.lower = std::log2(r_lo);
    out.unreliable = true;
    out.notes = notes.str() + "search floor reached; the bound may lie lower;";
    return out;
  }

  const double t_lo = std::log2(r_lo);
  const double t_hi = std::log2(r_hi);

  // The bisection route assumes lambda is non-increasing in r0 below the
  // point estimate; probe before trusting it.
  bool monotone = true;
  double prev = lambda_lo;
  for (int i = 1; i <= 3 && monotone; ++i) {
    const double t = t_lo + (t_hi - t_lo) * i / 4.0;
    const double lam = problem.statistic(std::exp2(t));
    if (lam > prev + 1e-2) monotone = false;
    prev = lam;
  }

  if (monotone) {
    const auto g = [&](double t) { return problem.statistic(std::exp2(t)) - crit; };
    out.lower = optim::bisect_root(g, t_lo, t_hi, config.tol_log2);
    notes << "solver:bisection;";
  } else {
    // Penalized objective in log2 r0; the infeasible side decreases
    // toward the boundary (by the excess statistic) to keep the function
    // unimodal for golden-section search.
    const auto h = [&](double t) {
      const double lam = problem.statistic(std::exp2(t));
      return lam > crit ? t + config.penalty_c + (lam - crit) : t;
    };
    auto res = optim::golden_section_min(h, t_lo, t_hi, config.tol_log2);
    double t = res.x;
    int nudge = 0;
    while (problem.statistic(std::exp2(t)) > crit && nudge++ < 1000 && t < t_hi) {
      t += config.tol_log2;
    }
    out.lower = std::min(t, t_hi);
    notes << "solver:golden-section (non-monotone statistic);";
  }
  out.notes = notes.str();
  return out;
}

IntervalResult lrt_lower_bound(double p_A, int event_year, const ScenarioSeries& actual,
                               const ScenarioSeries& counterfactual,
                               const PipelineConfig& config, LrtMode mode,
                               const LRTConfig& lrt_config) {
  LrtProblem problem(actual, counterfactual, p_A, event_year, config, mode);
  return lrt_lower_bound(problem, lrt_config);
}

}  // namespace evattr
