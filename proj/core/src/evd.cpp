// SPDX-License-Identifier: Apache-2.0
#include "evattr/evd.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "evattr/errors.hpp"

namespace evattr::evd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw InvalidInputError(std::string(what) + " must be finite");
  }
}

}  // namespace

EVDParams EVDParams::stationary(double mu, double sigma, double xi) {
  return EVDParams{{mu}, sigma, xi};
}

EVDParams EVDParams::with_trend(double beta0, double beta1, double sigma, double xi) {
  return EVDParams{{beta0, beta1}, sigma, xi};
}

double EVDParams::location(std::span<const double> x) const {
  if (is_stationary()) {
    return beta[0];
  }
  if (x.size() != covariate_dim()) {
    throw InvalidInputError("covariate vector has length " + std::to_string(x.size()) +
                            ", model expects " + std::to_string(covariate_dim()));
  }
  double mu = beta[0];
  for (std::size_t k = 0; k < x.size(); ++k) {
    require_finite(x[k], "covariate");
    mu += beta[k + 1] * x[k];
  }
  return mu;
}

void EVDParams::validate() const {
  if (beta.empty()) {
    throw InvalidInputError("location coefficient vector must not be empty");
  }
  for (double b : beta) {
    require_finite(b, "location coefficient");
  }
  require_finite(sigma, "scale");
  require_finite(xi, "shape");
  if (sigma <= 0.0) {
    throw InvalidInputError("scale must be positive");
  }
}

Support support_bounds(const EVDParams& params, std::span<const double> x,
                       double gumbel_tol) {
  params.validate();
  const double mu = params.location(x);
  if (std::abs(params.xi) < gumbel_tol) {
    return {-kInf, kInf};
  }
  const double endpoint = mu - params.sigma / params.xi;
  if (params.xi < 0.0) {
    return {-kInf, endpoint};
  }
  return {endpoint, kInf};
}

double gev_exceedance_prob(double z, const EVDParams& params,
                           std::span<const double> x, double gumbel_tol) {
  require_finite(z, "value");
  params.validate();
  const double mu = params.location(x);
  const double s = (z - mu) / params.sigma;

  double hazard;  // t^(-1/xi) with t the clamped bracket; p = 1 - exp(-hazard)
  if (std::abs(params.xi) < gumbel_tol) {
    hazard = std::exp(-s);
  } else {
    // compare against the endpoint itself so a value at the boundary maps
    // to exactly 0 (or 1) even when rounding leaves the bracket nonzero
    const double endpoint = mu - params.sigma / params.xi;
    if (params.xi < 0.0 && z >= endpoint) return 0.0;
    if (params.xi > 0.0 && z <= endpoint) return 1.0;
    const double bracket = 1.0 + params.xi * s;
    if (bracket <= 0.0) {
      return params.xi < 0.0 ? 0.0 : 1.0;
    }
    hazard = std::pow(bracket, -1.0 / params.xi);
  }
  return -std::expm1(-hazard);
}

double gev_log_survival(double z, const EVDParams& params,
                        std::span<const double> x, double gumbel_tol) {
  require_finite(z, "value");
  params.validate();
  const double mu = params.location(x);
  const double s = (z - mu) / params.sigma;

  double log_hazard;
  if (std::abs(params.xi) < gumbel_tol) {
    log_hazard = -s;
  } else {
    const double endpoint = mu - params.sigma / params.xi;
    if (params.xi < 0.0 && z >= endpoint) return -kInf;
    if (params.xi > 0.0 && z <= endpoint) return 0.0;
    const double bracket = 1.0 + params.xi * s;
    if (bracket <= 0.0) {
      return params.xi < 0.0 ? -kInf : 0.0;
    }
    log_hazard = -std::log(bracket) / params.xi;
  }
  if (log_hazard > -30.0) {
    return std::log(-std::expm1(-std::exp(log_hazard)));
  }
  // hazard below ~1e-13: p = hazard * (1 - hazard/2 + ...)
  return log_hazard + std::log1p(-0.5 * std::exp(log_hazard));
}

double gev_return_level(double p, const EVDParams& params,
                        std::span<const double> x, double gumbel_tol) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidInputError("exceedance probability must lie in (0, 1)");
  }
  params.validate();
  return params.location(x) + return_level_offset(p, params.sigma, params.xi, gumbel_tol);
}

double return_level_offset(double p, double sigma, double xi, double gumbel_tol) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidInputError("exceedance probability must lie in (0, 1)");
  }
  const double log_neg_log = std::log(-std::log1p(-p));  // log(-log(1-p))
  if (std::abs(xi) < gumbel_tol) {
    return -sigma * log_neg_log;
  }
  return -(sigma / xi) * (1.0 - std::exp(-xi * log_neg_log));
}

double gpd_exceedance_cdf(double x, double u, double sigma_u, double xi,
                          double gumbel_tol) {
  require_finite(x, "value");
  require_finite(u, "threshold");
  if (!(sigma_u > 0.0) || !std::isfinite(sigma_u)) {
    throw InvalidInputError("GPD scale must be positive and finite");
  }
  if (!(x > u)) {
    throw InvalidInputError("GPD exceedance CDF requires x > u");
  }
  const double s = (x - u) / sigma_u;
  if (std::abs(xi) < gumbel_tol) {
    return -std::expm1(-s);
  }
  const double bracket = 1.0 + xi * s;
  if (bracket <= 0.0) {
    return 1.0;  // at or beyond the finite upper endpoint
  }
  return -std::expm1(-std::log(bracket) / xi);
}

std::size_t ExceedanceSet::n_total() const {
  std::size_t n = 0;
  for (const auto& y : years) {
    n += static_cast<std::size_t>(y.n_obs);
  }
  return n;
}

void ExceedanceSet::validate() const {
  if (n_per_year < 1.0) {
    throw InvalidInputError("observations per year must be at least 1");
  }
  for (const auto& y : years) {
    if (y.n_obs < 0) {
      throw InvalidInputError("year blocks cannot have negative counts");
    }
  }
  for (const auto& e : exceedances) {
    if (e.year_slot >= years.size()) {
      throw InvalidInputError("exceedance refers to a missing year block");
    }
    if (!(e.value > threshold)) {
      throw InvalidInputError("every exceedance must lie above the threshold");
    }
  }
  if (exceedances.size() > n_total()) {
    throw InvalidInputError("more exceedances than observations");
  }
}

double pp_log_likelihood(const ExceedanceSet& data, const EVDParams& params,
                         double gumbel_tol) {
  params.validate();
  const double sigma = params.sigma;
  const double xi = params.xi;
  const bool gumbel = std::abs(xi) < gumbel_tol;

  double intensity = 0.0;
  for (const auto& y : data.years) {
    if (y.n_obs == 0) {
      continue;
    }
    const double s = (data.threshold - params.location(y.x)) / sigma;
    double hazard;
    if (gumbel) {
      hazard = std::exp(-s);
    } else {
      const double bracket = 1.0 + xi * s;
      if (bracket <= 0.0) {
        if (xi > 0.0) {
          return -kInf;  // threshold below the lower endpoint: infinite intensity
        }
        hazard = 0.0;  // threshold above the upper endpoint: no mass above u
      } else {
        hazard = std::pow(bracket, -1.0 / xi);
      }
    }
    intensity += y.n_obs * hazard;
  }

  double ll = -intensity / data.n_per_year;
  const double log_sigma = std::log(sigma);
  for (const auto& e : data.exceedances) {
    const double s = (e.value - params.location(data.years[e.year_slot].x)) / sigma;
    if (gumbel) {
      ll += -log_sigma - s;
    } else {
      const double bracket = 1.0 + xi * s;
      if (bracket <= 0.0) {
        return -kInf;  // exceedance outside the support has zero density
      }
      ll += -log_sigma - (1.0 / xi + 1.0) * std::log(bracket);
    }
  }
  return ll;
}

}  // namespace evattr::evd
