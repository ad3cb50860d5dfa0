// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace evattr::evd {

/// Shape magnitudes below this switch to the xi -> 0 (Gumbel) limit
/// formulas, which avoids catastrophic cancellation near xi = 0.
inline constexpr double kGumbelTol = 1e-8;

/// Parameters of a GEV / point-process extreme value model.
///
/// The location may depend linearly on covariates:
///   mu(x) = beta[0] + sum_k beta[k] * x[k-1].
/// A single-entry beta vector is the stationary case, where the location
/// is beta[0] regardless of any covariate passed in.
struct EVDParams {
  std::vector<double> beta{0.0};  ///< location coefficients, beta[0] is the intercept
  double sigma{1.0};              ///< scale, > 0
  double xi{0.0};                 ///< shape

  static EVDParams stationary(double mu, double sigma, double xi);
  static EVDParams with_trend(double beta0, double beta1, double sigma, double xi);

  std::size_t covariate_dim() const { return beta.size() - 1; }
  bool is_stationary() const { return beta.size() == 1; }

  /// Location mu(x). Throws InvalidInputError if x does not match
  /// covariate_dim() (stationary parameters accept any x).
  double location(std::span<const double> x = {}) const;

  /// Throws InvalidInputError unless sigma > 0 and all entries are finite.
  void validate() const;
};

/// Support interval of the distribution: the upper endpoint is finite
/// exactly when xi < 0 (short-tailed case), the lower when xi > 0.
struct Support {
  double lower;
  double upper;
};

Support support_bounds(const EVDParams& params, std::span<const double> x = {},
                       double gumbel_tol = kGumbelTol);

/// Exceedance probability p = P(Z > z) of the GEV with the given
/// parameters, evaluated at covariate x.
///
/// The [.]_+ bracket is clamped at zero, so a value at or beyond the
/// upper support endpoint (xi < 0) returns exactly 0, and a value at or
/// below the lower endpoint (xi > 0) returns 1.
double gev_exceedance_prob(double z, const EVDParams& params,
                           std::span<const double> x = {},
                           double gumbel_tol = kGumbelTol);

/// log P(Z > z), usable when the probability underflows double range
/// (returns -inf beyond a finite upper endpoint).
double gev_log_survival(double z, const EVDParams& params,
                        std::span<const double> x = {},
                        double gumbel_tol = kGumbelTol);

/// Return level: the value z with P(Z > z) = p, the inverse of
/// gev_exceedance_prob in z. Requires 0 < p < 1.
double gev_return_level(double p, const EVDParams& params,
                        std::span<const double> x = {},
                        double gumbel_tol = kGumbelTol);

/// Return level of a zero-location model: gev_return_level(p) with
/// beta = {0}. The identity mu = z - return_level_offset(p, sigma, xi)
/// recovers the location that places the p-return level at z.
double return_level_offset(double p, double sigma, double xi,
                           double gumbel_tol = kGumbelTol);

/// Conditional exceedance CDF of the generalized Pareto distribution,
/// P(X <= x | X > u). Diagnostic companion to the point-process
/// parameterization; requires x > u and sigma_u > 0.
double gpd_exceedance_cdf(double x, double u, double sigma_u, double xi,
                          double gumbel_tol = kGumbelTol);

/// One year of data entering the point-process likelihood: the covariate
/// vector shared by that year's observations and how many observations
/// the year contributes.
struct YearBlock {
  int year{};
  std::vector<double> x;  ///< covariate vector (empty for stationary models)
  int n_obs{1};
};

/// A value above the threshold, tagged with the year block it came from.
struct Exceedance {
  double value{};
  std::size_t year_slot{};
};

/// Threshold exceedances plus the block structure needed by the
/// point-process likelihood. n_per_year is the number of observations
/// per year (the ensemble size), the n_y of the likelihood.
struct ExceedanceSet {
  double threshold{};
  double n_per_year{1.0};
  std::vector<YearBlock> years;
  std::vector<Exceedance> exceedances;

  std::size_t n_total() const;
  void validate() const;
};

/// Log of the point-process likelihood with covariate-dependent location:
///
///   log L = -(1/n_y) * sum_i [1 + xi (u - mu_ti)/sigma]_+^(-1/xi)
///           + sum_j { -log sigma - (1/xi + 1) log [1 + xi (x_j - mu_tj)/sigma]_+ }
///
/// where i runs over all observations and j over exceedances. With a
/// stationary location the intensity sum collapses to
/// (n/n_y) [1 + xi (u - mu)/sigma]_+^(-1/xi).
///
/// Returns -inf when any exceedance lies outside the support, or when the
/// threshold sits below the lower endpoint of a heavy-tailed (xi > 0)
/// model; -inf is a valid value meaning zero likelihood.
double pp_log_likelihood(const ExceedanceSet& data, const EVDParams& params,
                         double gumbel_tol = kGumbelTol);

}  // namespace evattr::evd
