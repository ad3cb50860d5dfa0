// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "evattr/fit.hpp"
#include "evattr/series.hpp"

namespace evattr {

/// The extreme event under study: either a magnitude whose probability is
/// estimated from observations, or a directly specified probability
/// (sensitivity-sweep style). Exactly one of the two must be set.
struct EventDefinition {
  std::optional<double> magnitude;
  std::optional<double> probability;
  int year{};

  static EventDefinition from_magnitude(double z, int year);
  static EventDefinition from_probability(double p, int year);
  void validate() const;
};

/// Per-series covariate choices on top of the shared fit settings; the
/// defaults mirror the covariate treatment used for the case study
/// (trend in observations and the all-forcings run, none in the
/// counterfactual run).
struct PipelineConfig {
  FitConfig fit;
  CovariateMode observation_mode{CovariateMode::LinearInCovariate};
  CovariateMode actual_mode{CovariateMode::LinearInCovariate};
  CovariateMode counterfactual_mode{CovariateMode::Stationary};
};

/// Risk ratio with its base-2 logarithm; p_C = 0 maps to +inf, never an
/// error.
struct RiskRatio {
  double rr{};
  double log2_rr{};
};

RiskRatio make_risk_ratio(double p_numerator, double p_denominator);

struct AttributionResult {
  double p_O{};
  double z_A{};
  double p_C{};
  double rr{};
  double log2_rr{};
  double far{};  ///< 1 - 1/RR
  double covariate_at_event{};
  std::optional<FitResult> observation_fit;  ///< absent on the probability-override path
  FitResult actual_fit;
  FitResult counterfactual_fit;
  bool lrt_only{};  ///< p_C = 0: only the LRT interval is meaningful

  /// Diagnostic comparison without the quantile mapping: probabilities of
  /// the raw observed magnitude in both model scenarios. Present only
  /// when the event was given as a magnitude.
  std::optional<double> p_A_raw;
  std::optional<double> p_C_raw;
  std::optional<double> log2_rr_raw;
};

/// Step 1: probability of the observed event magnitude under the fitted
/// observational model, at the event year's covariate.
double estimate_p_O(const FitResult& observation_fit, const EventDefinition& event,
                    const ScenarioSeries& observations);

/// Step 2, the bias correction: the magnitude of equal rarity in the
/// actual-scenario model, z_A = return level of p_O at the event year.
double map_to_model(const FitResult& actual_fit, double p_O, int event_year,
                    const ScenarioSeries& actual);

/// Step 3: probability of exceeding z_A under the counterfactual model;
/// exactly 0 beyond its upper support endpoint.
double estimate_p_C(const FitResult& counterfactual_fit, double z_A);

/// Steps 1-4 composed, with per-stage error labels and the intermediate
/// quantities recorded for reporting.
AttributionResult run_attribution(const ScenarioSeries& observations,
                                  const ScenarioSeries& actual,
                                  const ScenarioSeries& counterfactual,
                                  const EventDefinition& event,
                                  const PipelineConfig& config);

/// Probability-override variant: step 1 is skipped, so no observational
/// series or fit is involved. The event must carry a probability.
AttributionResult run_attribution(const ScenarioSeries& actual,
                                  const ScenarioSeries& counterfactual,
                                  const EventDefinition& event,
                                  const PipelineConfig& config);

struct LRTConfig;  // uncertainty.hpp

struct SensitivityRow {
  double p_A{};
  double z_A{};
  double p_C{};
  double rr{};
  double log2_rr{};
  double lrt_lower_log2{};  ///< one-sided CI lower endpoint, log2 scale
  double rr_lower{};        ///< 2^lrt_lower_log2
};

/// Sensitivity of the risk ratio and its LRT lower bound to the event
/// definition: one row per p_A = p_O, sorted by descending p_A. The
/// scenario fits are shared across rows.
std::vector<SensitivityRow> sensitivity_sweep(const ScenarioSeries& actual,
                                              const ScenarioSeries& counterfactual,
                                              int event_year,
                                              std::span<const double> p_values,
                                              const PipelineConfig& config,
                                              const LRTConfig& lrt_config);

}  // namespace evattr
