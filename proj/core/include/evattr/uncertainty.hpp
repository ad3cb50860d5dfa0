// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evattr/attribution.hpp"
#include "evattr/fit.hpp"
#include "evattr/series.hpp"

namespace evattr {

enum class IntervalMethod { Delta, Bootstrap, LrtPcOnly, LrtJoint };

std::string to_string(IntervalMethod m);

/// A confidence interval for log2 RR. LRT intervals are one-sided with
/// upper = +inf.
struct IntervalResult {
  IntervalMethod method{};
  double level{0.95};
  double lower{};
  double upper{};
  double point_log2{};

  // method-specific diagnostics
  double se_log2{};        ///< delta method standard error (log2 scale)
  double gradient_check{}; ///< delta: max relative half-step deviation
  int n_infinite{0};       ///< bootstrap replicates with infinite RR
  int n_failed{0};         ///< bootstrap replicates whose refit failed
  bool unreliable{false};
  std::string notes;
};

/// First-order variance propagation through the full theta -> log RR map
/// (return level under the actual fit, survival under the counterfactual
/// fit), with the two fitted covariance blocks treated as independent.
/// Fails with MethodInapplicableError when p_C = 0.
IntervalResult delta_interval(const AttributionResult& attr);

struct BootstrapConfig {
  int replicates{500};
  bool resample_members{true};
  bool resample_years{true};
  /// Resample a separate year multiset per member instead of one shared
  /// multiset per replicate (the shared default keeps the year-covariate
  /// pairing identical across members).
  bool per_member_years{false};
  std::uint64_t seed{0};
  int threads{1};
  double max_failure_fraction{0.20};
  double level{0.95};
};

/// Structured resampling of members and years with replacement, refitting
/// both scenario models per replicate at fixed p_O, basic bootstrap
/// interval from the replicate percentiles. Replicates with infinite RR
/// are excluded from the percentiles and reported in the diagnostics.
IntervalResult bootstrap_interval(double p_O, int event_year, const ScenarioSeries& actual,
                                  const ScenarioSeries& counterfactual,
                                  const PipelineConfig& config,
                                  const BootstrapConfig& bootstrap);

enum class LrtMode { PcOnly, Joint };

struct LRTConfig {
  double chisq_crit{3.841};  ///< 95th percentile of chi-square, 1 d.f.
  double level{0.95};
  double log2_floor{-10.0};  ///< lower search limit for r0, log2 scale
  double log2_cap{60.0};     ///< bracket cap when the point estimate is infinite
  double tol_log2{1e-3};     ///< solver tolerance on log2 r0
  double penalty_c{1e12};    ///< penalty constant of the fallback objective
  double lambda_tol{1e-2};   ///< tolerated constrained-beats-unconstrained slack
};

/// The likelihood-ratio test of RR = r0. Holds the data, the
/// unconstrained fits, and performs the constrained maximization where
/// the counterfactual location is pinned to
///   mu_C = z_A(theta_A) + (sigma_C/xi_C) {1 - (-log(1 - p_A/r0))^(-xi_C)},
/// the location that places the return level of p_A/r0 exactly at z_A.
/// In Joint mode (beta_A..., sigma_A, xi_A, sigma_C, xi_C) are free over
/// the two-scenario likelihood; in PcOnly mode theta_A is frozen at its
/// MLE and only (sigma_C, xi_C) are free. One degree of freedom either
/// way.
class LrtProblem {
 public:
  LrtProblem(const ScenarioSeries& actual, const ScenarioSeries& counterfactual,
             double p_A, int event_year, const PipelineConfig& config, LrtMode mode);

  /// Reuses fits already computed on the same series.
  LrtProblem(const ScenarioSeries& actual, const ScenarioSeries& counterfactual,
             double p_A, int event_year, const PipelineConfig& config, LrtMode mode,
             FitResult actual_fit, FitResult counterfactual_fit);

  /// Prepared exceedance sets (the counterfactual fit must be stationary).
  LrtProblem(evd::ExceedanceSet actual, evd::ExceedanceSet counterfactual,
             std::vector<double> x_event, double p_A, const FitConfig& fit_config,
             LrtMode mode, FitResult actual_fit, FitResult counterfactual_fit);

  /// The statistic lambda(r0) = 2 [log L(unconstrained) - log L(RR = r0)].
  /// Small negative optimizer residues are healed by re-polishing the
  /// unconstrained side and then clamped to zero.
  double statistic(double r0);

  double p_A() const { return p_a_; }
  LrtMode mode() const { return mode_; }
  double point_rr() const;
  double point_log2_rr() const;
  double z_A_hat() const { return z_a_hat_; }
  const evd::EVDParams& actual_params() const { return actual_params_; }
  const evd::EVDParams& counterfactual_params() const { return cf_params_; }
  int evaluations() const { return evaluations_; }

 private:
  void initialize();
  double constrained_max_loglik(double r0);

  evd::ExceedanceSet actual_set_;
  evd::ExceedanceSet cf_set_;
  std::vector<double> x_event_;
  double p_a_{};
  FitConfig fit_config_;
  LrtMode mode_{LrtMode::Joint};

  evd::EVDParams actual_params_;
  evd::EVDParams cf_params_;
  bool ll_fits_converged_{true};
  double ll_actual_{};
  double ll_cf_{};
  double z_a_hat_{};
  double p_c_hat_{};
  int evaluations_{0};
};

/// One-shot evaluation of lambda(r0).
double lrt_statistic(double r0, double p_A, const ScenarioSeries& actual,
                     const ScenarioSeries& counterfactual, int event_year,
                     const PipelineConfig& config, LrtMode mode);

/// The smallest r0 not rejected by the LRT at chisq_crit, as a one-sided
/// interval [log2 r0, +inf). Bisection on lambda(r0) - crit along log2 r0
/// is the primary solver (validated by a monotonicity probe); on
/// violation it falls back to golden-section search on the penalized
/// objective. Works when the point estimate is infinite by bracketing at
/// 2^log2_cap.
IntervalResult lrt_lower_bound(LrtProblem& problem, const LRTConfig& config);

IntervalResult lrt_lower_bound(double p_A, int event_year, const ScenarioSeries& actual,
                               const ScenarioSeries& counterfactual,
                               const PipelineConfig& config, LrtMode mode,
                               const LRTConfig& lrt_config);

}  // namespace evattr
