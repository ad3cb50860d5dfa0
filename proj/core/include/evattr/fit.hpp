// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evattr/evd.hpp"
#include "evattr/series.hpp"

namespace evattr {

enum class CovariateMode { Stationary, LinearInCovariate };

struct FitConfig {
  double threshold_quantile{0.80};
  CovariateMode covariate_mode{CovariateMode::Stationary};
  double gumbel_tolerance{evd::kGumbelTol};
  int max_iterations{4000};
  double tolerance{1e-10};  ///< relative simplex spread at convergence
  int restarts{2};
  double hessian_rel_step{1e-4};
  double hessian_abs_floor{1e-6};
};

/// Maximum-likelihood point-process fit. The covariance is over the free
/// parameters in the order (beta..., sigma, xi).
struct FitResult {
  evd::EVDParams params;
  double loglik{};
  Eigen::MatrixXd covariance;
  double threshold{};
  int n_exceedances{};
  double aic{};
  bool converged{false};
  double n_per_year{1.0};
  std::string diagnostics;

  int n_free() const { return static_cast<int>(params.beta.size()) + 2; }
  std::vector<double> standard_errors() const;
};

/// Empirical quantile with linear interpolation at h = (n - 1) q between
/// order statistics. Shared convention for thresholds and bootstrap
/// percentiles.
double empirical_quantile(std::vector<double> values, double q);

/// The q-quantile of all pooled values (all members, all years).
double select_threshold(const ScenarioSeries& series, double q);

/// Collects values strictly above the threshold together with the
/// year-block structure the likelihood needs.
evd::ExceedanceSet make_exceedance_set(const ScenarioSeries& series, double threshold,
                                       CovariateMode mode);

FitResult fit_pp(const ScenarioSeries& series, const FitConfig& config);

/// Fit on a prepared exceedance set with an explicit start (used for
/// bootstrap replicates and constrained refits).
FitResult fit_pp(const evd::ExceedanceSet& data, const FitConfig& config,
                 const evd::EVDParams& start);

struct AicPreference {
  bool stationary_preferred{};
  double delta_aic{};  ///< AIC(nonstationary) - AIC(stationary)
};

/// Smaller AIC wins; ties go to the model with fewer parameters.
AicPreference compare_aic(const FitResult& stationary, const FitResult& nonstationary);

struct MRLRow {
  double threshold{};
  double mean_excess{};
  double std_error{};
  std::size_t count{};
};

struct MRLTable {
  std::vector<MRLRow> rows;
};

/// Mean-excess and its standard error per candidate threshold. Thresholds
/// above the data maximum yield count-zero rows rather than errors.
MRLTable mean_residual_life(const ScenarioSeries& series, std::span<const double> thresholds);

}  // namespace evattr
