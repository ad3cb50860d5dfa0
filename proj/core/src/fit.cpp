// SPDX-License-Identifier: Apache-2.0
#include "evattr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "evattr/errors.hpp"
#include "evattr/optim.hpp"

namespace evattr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kXiLower = -1.0;  // likelihood is unbounded below xi = -1
constexpr double kXiUpper = 2.0;

struct Packing {
  std::size_t n_beta{1};

  std::size_t dim() const { return n_beta + 2; }

  std::vector<double> pack(const evd::EVDParams& p) const {
    std::vector<double> phi(p.beta.begin(), p.beta.end());
    phi.push_back(std::log(p.sigma));
    phi.push_back(p.xi);
    return phi;
  }

  evd::EVDParams unpack(std::span<const double> phi) const {
    evd::EVDParams p;
    p.beta.assign(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(n_beta));
    p.sigma = std::exp(phi[n_beta]);
    p.xi = phi[n_beta + 1];
    return p;
  }
};

/// Covariance as the (pseudo-)inverse of the negative Hessian, clamping
/// non-positive curvature directions to zero variance.
Eigen::MatrixXd covariance_from_hessian(const Eigen::MatrixXd& hessian, bool* pseudo) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-hessian);
  const auto& vals = es.eigenvalues();
  const double cutoff = std::max(vals.cwiseAbs().maxCoeff(), 1.0) * 1e-10;
  bool degenerate = false;
  Eigen::VectorXd inv(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] > cutoff) {
      inv[i] = 1.0 / vals[i];
    } else {
      inv[i] = 0.0;
      degenerate = true;
    }
  }
  if (pseudo) *pseudo = degenerate;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// Core fit on a set that is centered internally at its threshold; the
/// start location is already expressed as an offset from the threshold.
FitResult fit_centered(const evd::ExceedanceSet& data, const FitConfig& config,
                       const evd::EVDParams& centered_start) {
  data.validate();
  if (data.exceedances.size() < 5) {
    throw InsufficientExceedancesError(
        "only " + std::to_string(data.exceedances.size()) +
        " exceedances above the threshold; at least 5 are required");
  }
  const Packing packing{centered_start.beta.size()};
  if (centered_start.covariate_dim() > 0) {
    for (const auto& y : data.years) {
      if (y.x.size() != centered_start.covariate_dim()) {
        throw InvalidInputError("covariate dimension does not match the model");
      }
    }
  }

  evd::ExceedanceSet centered = data;
  centered.threshold = 0.0;
  for (auto& e : centered.exceedances) e.value -= data.threshold;

  const auto neg_loglik = [&](std::span<const double> phi) -> double {
    const double log_sigma = phi[packing.n_beta];
    const double xi = phi[packing.n_beta + 1];
    if (std::abs(log_sigma) > 50.0 || xi <= kXiLower || xi >= kXiUpper) {
      return kInf;
    }
    const double ll =
        pp_log_likelihood(centered, packing.unpack(phi), config.gumbel_tolerance);
    return std::isfinite(ll) ? -ll : kInf;
  };

  // Start ladder: widen the scale / move the shape until the likelihood
  // is finite somewhere.
  std::vector<double> phi0 = packing.pack(centered_start);
  std::string start_note;
  if (!std::isfinite(neg_loglik(phi0))) {
    bool found = false;
    for (double scale : {2.0, 4.0, 8.0, 16.0}) {
      for (double xi0 : {centered_start.xi, -0.1, 0.05, -0.25, 0.3}) {
        auto trial = packing.pack(centered_start);
        trial[packing.n_beta] += std::log(scale);
        trial[packing.n_beta + 1] = xi0;
        if (std::isfinite(neg_loglik(trial))) {
          phi0 = std::move(trial);
          start_note = "start:perturbed";
          found = true;
          break;
        }
      }
      if (found) break;
    }
    if (!found) {
      throw FitError("non-finite likelihood at every tried start");
    }
  }

  std::vector<double> step(packing.dim());
  const double loc_step = 0.5 * centered_start.sigma;
  for (std::size_t i = 0; i < packing.n_beta; ++i) step[i] = loc_step;
  step[packing.n_beta] = 0.3;
  step[packing.n_beta + 1] = 0.08;

  optim::NelderMeadOptions nm_opts;
  nm_opts.max_iterations = config.max_iterations;
  nm_opts.f_tolerance = config.tolerance;

  auto best = optim::nelder_mead(neg_loglik, phi0, step, nm_opts);
  for (int r = 1; r <= config.restarts; ++r) {
    auto shrunk = step;
    for (double& s : shrunk) s *= std::pow(0.25, r);
    auto retry = optim::nelder_mead(neg_loglik, best.x, shrunk, nm_opts);
    if (retry.f < best.f) best = std::move(retry);
  }

  auto polished = optim::bfgs_polish(neg_loglik, best.x);
  if (std::isfinite(polished.f) && polished.f <= best.f) {
    best.x = std::move(polished.x);
    best.f = polished.f;
  }
  if (!std::isfinite(best.f)) {
    throw FitError("optimizer failed to find a finite likelihood");
  }

  // Convergence verdict is the first-order condition at the reported
  // optimum, not the optimizer's internal stopping heuristics.
  bool converged = true;
  {
    const auto grad = optim::central_gradient(neg_loglik, best.x, 1e-6, 1e-9);
    const double scale = std::max(1.0, std::abs(best.f));
    for (double g : grad) {
      if (!std::isfinite(g) || std::abs(g) > 1e-4 * scale) {
        converged = false;
        break;
      }
    }
  }

  FitResult result;
  result.threshold = data.threshold;
  result.n_per_year = data.n_per_year;
  result.n_exceedances = static_cast<int>(data.exceedances.size());
  result.loglik = -best.f;
  result.converged = converged;

  std::ostringstream notes;
  if (!start_note.empty()) notes << start_note << ";";

  evd::EVDParams centered_hat = packing.unpack(best.x);
  const double sigma_floor = 1e-6 * std::max(1.0, std::abs(data.threshold));
  if (centered_hat.sigma < sigma_floor) {
    result.converged = false;
    notes << "scale-collapsed;";
  }
  if (centered_hat.xi <= kXiLower + 1e-6 || centered_hat.xi >= kXiUpper - 1e-6) {
    result.converged = false;
    notes << "shape-at-bound;";
  }

  // Hessian of the log-likelihood in natural (sigma, not log sigma)
  // coordinates, still centered at the threshold: curvature in the
  // location offset equals curvature in the intercept.
  const auto loglik_natural = [&](std::span<const double> psi) -> double {
    evd::EVDParams p;
    p.beta.assign(psi.begin(), psi.begin() + static_cast<std::ptrdiff_t>(packing.n_beta));
    p.sigma = psi[packing.n_beta];
    p.xi = psi[packing.n_beta + 1];
    if (!(p.sigma > 0.0) || p.xi <= kXiLower || p.xi >= kXiUpper) return -kInf;
    return pp_log_likelihood(centered, p, config.gumbel_tolerance);
  };
  std::vector<double> psi_hat(centered_hat.beta);
  psi_hat.push_back(centered_hat.sigma);
  psi_hat.push_back(centered_hat.xi);

  bool hessian_ok = false;
  const Eigen::MatrixXd hessian = optim::central_hessian(
      loglik_natural, psi_hat, config.hessian_rel_step, config.hessian_abs_floor, &hessian_ok);
  bool pseudo = false;
  if (hessian_ok) {
    result.covariance = covariance_from_hessian(hessian, &pseudo);
    if (pseudo) notes << "covariance:pseudo-inverse;";
  } else {
    result.covariance =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(packing.dim()),
                              static_cast<Eigen::Index>(packing.dim()));
    result.converged = false;
    notes << "hessian:non-finite;";
  }

  result.params = centered_hat;
  result.params.beta[0] += data.threshold;
  result.aic = 2.0 * packing.dim() - 2.0 * result.loglik;
  result.diagnostics = notes.str();
  return result;
}

}  // namespace

std::vector<double> FitResult::standard_errors() const {
  std::vector<double> se(static_cast<std::size_t>(covariance.rows()));
  for (Eigen::Index i = 0; i < covariance.rows(); ++i) {
    se[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, covariance(i, i)));
  }
  return se;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw InvalidInputError("quantile of an empty sample");
  }
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidInputError("quantile level must lie in (0, 1)");
  }
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const std::size_t i = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(i);
  if (i + 1 >= values.size() || frac == 0.0) {
    return values[i];
  }
  return values[i] + frac * (values[i + 1] - values[i]);
}

double select_threshold(const ScenarioSeries& series, double q) {
  series.validate();
  return empirical_quantile(series.pooled(), q);
}

evd::ExceedanceSet make_exceedance_set(const ScenarioSeries& series, double threshold,
                                       CovariateMode mode) {
  series.validate();
  if (mode == CovariateMode::LinearInCovariate && !series.covariate) {
    throw InvalidInputError("covariate-dependent fit requested but the " +
                            to_string(series.scenario) + " series has no covariate");
  }
  evd::ExceedanceSet set;
  set.threshold = threshold;
  set.n_per_year = static_cast<double>(series.members);
  set.years.reserve(series.year_count());
  for (std::size_t t = 0; t < series.year_count(); ++t) {
    evd::YearBlock block;
    block.year = series.years[t];
    block.n_obs = series.members;
    if (mode == CovariateMode::LinearInCovariate) {
      block.x = {(*series.covariate)[t]};
    }
    set.years.push_back(std::move(block));
  }
  for (int m = 0; m < series.members; ++m) {
    for (std::size_t t = 0; t < series.year_count(); ++t) {
      const double v = series.value(m, t);
      if (v > threshold) {
        set.exceedances.push_back({v, t});
      }
    }
  }
  return set;
}

FitResult fit_pp(const ScenarioSeries& series, const FitConfig& config) {
  series.validate();
  if (series.size() < 30) {
    throw InvalidInputError("need at least 30 pooled values to attempt a fit");
  }
  const double u = select_threshold(series, config.threshold_quantile);
  const auto set = make_exceedance_set(series, u, config.covariate_mode);

  // Method-of-moments start from the per-year block maxima, expressed as
  // offsets from the threshold so the optimizer works on centered data.
  const std::size_t n_years = series.year_count();
  std::vector<double> block_max(n_years, -kInf);
  for (int m = 0; m < series.members; ++m) {
    for (std::size_t t = 0; t < n_years; ++t) {
      block_max[t] = std::max(block_max[t], series.value(m, t) - u);
    }
  }
  double mean = 0.0;
  for (double v : block_max) mean += v;
  mean /= static_cast<double>(n_years);
  double var = 0.0;
  for (double v : block_max) var += (v - mean) * (v - mean);
  var /= std::max<std::size_t>(n_years - 1, 1);

  evd::EVDParams start;
  start.beta.assign(config.covariate_mode == CovariateMode::LinearInCovariate ? 2 : 1, 0.0);
  start.beta[0] = mean;
  start.sigma = std::max(std::sqrt(var * 6.0) / std::numbers::pi_v<double>, 1e-8);
  start.xi = -0.1;
  return fit_centered(set, config, start);
}

FitResult fit_pp(const evd::ExceedanceSet& data, const FitConfig& config,
                 const evd::EVDParams& start) {
  start.validate();
  evd::EVDParams centered_start = start;
  centered_start.beta[0] -= data.threshold;
  return fit_centered(data, config, centered_start);
}

AicPreference compare_aic(const FitResult& stationary, const FitResult& nonstationary) {
  if (!stationary.converged || !nonstationary.converged) {
    throw InvalidInputError("AIC comparison requires two converged fits");
  }
  if (stationary.threshold != nonstationary.threshold ||
      stationary.n_per_year != nonstationary.n_per_year ||
      stationary.n_exceedances != nonstationary.n_exceedances) {
    throw InvalidInputError("AIC comparison requires fits of the same dataset");
  }
  AicPreference pref;
  pref.delta_aic = nonstationary.aic - stationary.aic;
  if (stationary.aic == nonstationary.aic) {
    pref.stationary_preferred = stationary.n_free() <= nonstationary.n_free();
  } else {
    pref.stationary_preferred = stationary.aic < nonstationary.aic;
  }
  return pref;
}

MRLTable mean_residual_life(const ScenarioSeries& series, std::span<const double> thresholds) {
  series.validate();
  std::vector<double> sorted = series.pooled();
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> us(thresholds.begin(), thresholds.end());
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end()), us.end());

  MRLTable table;
  table.rows.reserve(us.size());
  for (double u : us) {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), u);
    const std::size_t count = static_cast<std::size_t>(sorted.end() - it);
    MRLRow row;
    row.threshold = u;
    row.count = count;
    if (count == 0) {
      row.mean_excess = std::numeric_limits<double>::quiet_NaN();
      row.std_error = std::numeric_limits<double>::quiet_NaN();
    } else {
      double mean = 0.0;
      for (auto p = it; p != sorted.end(); ++p) mean += *p - u;
      mean /= static_cast<double>(count);
      row.mean_excess = mean;
      if (count > 1) {
        double var = 0.0;
        for (auto p = it; p != sorted.end(); ++p) {
          const double d = (*p - u) - mean;
          var += d * d;
        }
        var /= static_cast<double>(count - 1);
        row.std_error = std::sqrt(var / static_cast<double>(count));
      } else {
        row.std_error = std::numeric_limits<double>::quiet_NaN();
      }
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace evattr
