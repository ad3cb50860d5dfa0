// SPDX-License-Identifier: Apache-2.0
#include "evattr/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evattr/errors.hpp"
#include "evattr/uncertainty.hpp"

namespace evattr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> event_covariate(const FitResult& fit, int event_year,
                                    const ScenarioSeries& series) {
  if (fit.params.is_stationary()) {
    return {};
  }
  return {series.covariate_at(event_year)};
}

FitConfig with_mode(const FitConfig& base, CovariateMode mode) {
  FitConfig cfg = base;
  cfg.covariate_mode = mode;
  return cfg;
}

}  // namespace

EventDefinition EventDefinition::from_magnitude(double z, int year) {
  EventDefinition e;
  e.magnitude = z;
  e.year = year;
  return e;
}

EventDefinition EventDefinition::from_probability(double p, int year) {
  EventDefinition e;
  e.probability = p;
  e.year = year;
  return e;
}

void EventDefinition::validate() const {
  if (magnitude.has_value() == probability.has_value()) {
    throw InvalidInputError(
        "event must be defined by exactly one of magnitude or probability");
  }
  if (magnitude && !std::isfinite(*magnitude)) {
    throw InvalidInputError("event magnitude must be finite");
  }
  if (probability && !(*probability > 0.0 && *probability < 1.0)) {
    throw InvalidInputError("event probability must lie in (0, 1)");
  }
}

RiskRatio make_risk_ratio(double p_numerator, double p_denominator) {
  if (!(p_numerator >= 0.0) || !(p_denominator >= 0.0)) {
    throw InvalidInputError("probabilities must be non-negative");
  }
  RiskRatio out;
  if (p_denominator == 0.0) {
    out.rr = p_numerator > 0.0 ? kInf : std::numeric_limits<double>::quiet_NaN();
    out.log2_rr = out.rr;
    return out;
  }
  out.rr = p_numerator / p_denominator;
  out.log2_rr = std::log2(p_numerator) - std::log2(p_denominator);
  return out;
}

double estimate_p_O(const FitResult& observation_fit, const EventDefinition& event,
                    const ScenarioSeries& observations) {
  event.validate();
  if (event.probability) {
    return *event.probability;
  }
  if (!observation_fit.converged) {
    throw FitError("observation fit did not converge");
  }
  const auto x = event_covariate(observation_fit, event.year, observations);
  return evd::gev_exceedance_prob(*event.magnitude, observation_fit.params, x);
}

double map_to_model(const FitResult& actual_fit, double p_O, int event_year,
                    const ScenarioSeries& actual) {
  if (!(p_O > 0.0 && p_O < 1.0)) {
    throw InvalidInputError("p_O must lie in (0, 1)");
  }
  if (!actual_fit.converged) {
    throw FitError("actual-scenario fit did not converge");
  }
  const auto x = event_covariate(actual_fit, event_year, actual);
  return evd::gev_return_level(p_O, actual_fit.params, x);
}

double estimate_p_C(const FitResult& counterfactual_fit, double z_A) {
  if (!counterfactual_fit.converged) {
    throw FitError("counterfactual fit did not converge");
  }
  return evd::gev_exceedance_prob(z_A, counterfactual_fit.params);
}

AttributionResult run_attribution(const ScenarioSeries& observations,
                                  const ScenarioSeries& actual,
                                  const ScenarioSeries& counterfactual,
                                  const EventDefinition& event,
                                  const PipelineConfig& config) {
  event.validate();

  AttributionResult result;
  try {
    result.actual_fit = fit_pp(actual, with_mode(config.fit, config.actual_mode));
  } catch (const Error& err) {
    throw FitError("actual scenario: " + std::string(err.what()));
  }
  try {
    result.counterfactual_fit =
        fit_pp(counterfactual, with_mode(config.fit, config.counterfactual_mode));
  } catch (const Error& err) {
    throw FitError("counterfactual scenario: " + std::string(err.what()));
  }

  if (event.magnitude) {
    try {
      result.observation_fit =
          fit_pp(observations, with_mode(config.fit, config.observation_mode));
    } catch (const Error& err) {
      throw FitError("observations: " + std::string(err.what()));
    }
    result.p_O = estimate_p_O(*result.observation_fit, event, observations);
    if (!(result.p_O > 0.0 && result.p_O < 1.0)) {
      throw FitError("observations: event probability " + std::to_string(result.p_O) +
                     " is degenerate; the event magnitude lies outside the fitted support");
    }
  } else {
    result.p_O = *event.probability;
  }

  result.z_A = map_to_model(result.actual_fit, result.p_O, event.year, actual);
  result.p_C = estimate_p_C(result.counterfactual_fit, result.z_A);
  if (!result.actual_fit.params.is_stationary()) {
    result.covariate_at_event = actual.covariate_at(event.year);
  }

  const RiskRatio ratio = make_risk_ratio(result.p_O, result.p_C);
  result.rr = ratio.rr;
  result.log2_rr = ratio.log2_rr;
  result.far = result.p_C == 0.0 ? 1.0 : 1.0 - 1.0 / ratio.rr;
  result.lrt_only = result.p_C == 0.0;

  if (event.magnitude) {
    // Diagnostic: the risk ratio one would report without the quantile
    // mapping, evaluating the raw observed magnitude in both models.
    const auto x_a = event_covariate(result.actual_fit, event.year, actual);
    result.p_A_raw = evd::gev_exceedance_prob(*event.magnitude, result.actual_fit.params, x_a);
    result.p_C_raw = evd::gev_exceedance_prob(*event.magnitude, result.counterfactual_fit.params);
    result.log2_rr_raw = make_risk_ratio(*result.p_A_raw, *result.p_C_raw).log2_rr;
  }
  return result;
}

AttributionResult run_attribution(const ScenarioSeries& actual,
                                  const ScenarioSeries& counterfactual,
                                  const EventDefinition& event,
                                  const PipelineConfig& config) {
  event.validate();
  if (!event.probability) {
    throw InvalidInputError(
        "the observation-free pipeline requires a probability-defined event");
  }
  static const ScenarioSeries no_observations{};
  return run_attribution(no_observations, actual, counterfactual, event, config);
}

std::vector<SensitivityRow> sensitivity_sweep(const ScenarioSeries& actual,
                                              const ScenarioSeries& counterfactual,
                                              int event_year,
                                              std::span<const double> p_values,
                                              const PipelineConfig& config,
                                              const LRTConfig& lrt_config) {
  for (double p : p_values) {
    if (!(p > 0.0 && p < 1.0)) {
      throw InvalidInputError("sweep probabilities must lie in (0, 1)");
    }
  }
  FitResult actual_fit, cf_fit;
  try {
    actual_fit = fit_pp(actual, with_mode(config.fit, config.actual_mode));
  } catch (const Error& err) {
    throw FitError("actual scenario: " + std::string(err.what()));
  }
  try {
    cf_fit = fit_pp(counterfactual, with_mode(config.fit, config.counterfactual_mode));
  } catch (const Error& err) {
    throw FitError("counterfactual scenario: " + std::string(err.what()));
  }

  std::vector<double> ps(p_values.begin(), p_values.end());
  std::sort(ps.begin(), ps.end(), std::greater<>());

  std::vector<SensitivityRow> rows;
  rows.reserve(ps.size());
  for (double p : ps) {
    SensitivityRow row;
    row.p_A = p;
    row.z_A = map_to_model(actual_fit, p, event_year, actual);
    row.p_C = estimate_p_C(cf_fit, row.z_A);
    const RiskRatio ratio = make_risk_ratio(p, row.p_C);
    row.rr = ratio.rr;
    row.log2_rr = ratio.log2_rr;

    LrtProblem problem(actual, counterfactual, p, event_year, config, LrtMode::Joint,
                       actual_fit, cf_fit);
    const IntervalResult interval = lrt_lower_bound(problem, lrt_config);
    row.lrt_lower_log2 = interval.lower;
    row.rr_lower = std::exp2(interval.lower);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace evattr
