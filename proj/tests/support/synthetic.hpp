// SPDX-License-Identifier: Apache-2.0
//
// Shared synthetic-study configurations for the test suites.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "evattr/series.hpp"

namespace synth {

/// Quadratic covariate ramp reaching `peak` at (n-2)/(n-1) of the way
/// through, loosely shaped like a smoothed warming curve.
inline std::vector<double> ramp_covariate(int n_years, double peak) {
  std::vector<double> x(static_cast<std::size_t>(n_years));
  const double denom = static_cast<double>(n_years - 2);
  for (int t = 0; t < n_years; ++t) {
    const double s = static_cast<double>(t) / denom;
    x[static_cast<std::size_t>(t)] = peak * s * s;
  }
  return x;
}

/// A study shaped like the central-US heatwave case: 5-member actual
/// ensemble with a trend, 12-member stationary counterfactual with a
/// bounded upper tail just below the mapped event magnitude at small p_A.
inline evattr::StudySpec heatwave_like_study(std::uint64_t seed) {
  evattr::StudySpec spec;
  spec.observations.truth = evattr::evd::EVDParams::with_trend(-0.802, 0.404, 1.250, -0.239);
  spec.observations.members = 1;
  spec.observations.first_year = 1901;
  spec.observations.n_years = 112;
  spec.observations.use_covariate = true;

  spec.actual.truth = evattr::evd::EVDParams::with_trend(1.263, 1.382, 0.926, -0.197);
  spec.actual.members = 5;
  spec.actual.first_year = 1901;
  spec.actual.n_years = 112;
  spec.actual.use_covariate = true;

  spec.counterfactual.truth = evattr::evd::EVDParams::stationary(1.415, 0.638, -0.179);
  spec.counterfactual.members = 12;
  spec.counterfactual.first_year = 1901;
  spec.counterfactual.n_years = 100;
  spec.counterfactual.use_covariate = false;

  spec.covariate = ramp_covariate(112, 0.92);  // 0.92 at 2011, the event year
  spec.event_probability = 0.032;
  spec.event_year = 2011;
  spec.seed = seed;
  return spec;
}

/// A configuration far from any support boundary: moderate counterfactual
/// probabilities, mild shapes. Suitable for delta/bootstrap comparisons.
inline evattr::StudySpec well_behaved_study(std::uint64_t seed) {
  evattr::StudySpec spec;
  spec.observations.truth = evattr::evd::EVDParams::with_trend(0.0, 0.5, 1.0, -0.10);
  spec.observations.members = 1;
  spec.observations.first_year = 1901;
  spec.observations.n_years = 112;
  spec.observations.use_covariate = true;

  spec.actual.truth = evattr::evd::EVDParams::with_trend(1.0, 0.8, 1.0, -0.12);
  spec.actual.members = 6;
  spec.actual.first_year = 1901;
  spec.actual.n_years = 112;
  spec.actual.use_covariate = true;

  spec.counterfactual.truth = evattr::evd::EVDParams::stationary(0.8, 1.0, -0.10);
  spec.counterfactual.members = 8;
  spec.counterfactual.first_year = 1901;
  spec.counterfactual.n_years = 100;
  spec.counterfactual.use_covariate = false;

  spec.covariate = ramp_covariate(112, 0.90);
  spec.event_probability = 0.10;
  spec.event_year = 2011;
  spec.seed = seed;
  return spec;
}

}  // namespace synth
