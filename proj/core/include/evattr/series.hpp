// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evattr/evd.hpp"

namespace evattr {

enum class Scenario { Observation, Actual, Counterfactual };

std::string to_string(Scenario s);

/// Annual values with ensemble-member structure. Values are stored
/// member-major: values[m * year_count() + t]. The optional covariate is
/// per-year and shared across members.
struct ScenarioSeries {
  Scenario scenario{Scenario::Observation};
  std::vector<int> years;  ///< ascending, no duplicates
  int members{1};
  std::vector<double> values;
  std::optional<std::vector<double>> covariate;

  std::size_t year_count() const { return years.size(); }
  std::size_t size() const { return values.size(); }

  double value(int member, std::size_t t) const {
    return values[static_cast<std::size_t>(member) * years.size() + t];
  }
  double& value(int member, std::size_t t) {
    return values[static_cast<std::size_t>(member) * years.size() + t];
  }

  std::vector<double> pooled() const { return values; }

  /// Index of a calendar year; throws InvalidInputError if absent.
  std::size_t index_of_year(int year) const;

  /// Covariate value for a calendar year; throws InvalidInputError if the
  /// series has no covariate or the year is out of range.
  double covariate_at(int year) const;

  void validate() const;
};

/// Reads the CSV schema `year,member,value[,covariate]` (header required).
/// Every (year, member) pair must appear exactly once, the member-year
/// grid must be complete, and covariate values must agree across members
/// within a year. Parse and validation failures name the offending line.
ScenarioSeries load_series(const std::filesystem::path& path, Scenario tag);

/// Writes the same schema with round-trip precision.
void save_series(const ScenarioSeries& series, const std::filesystem::path& path);

/// Subtracts the pooled mean over [ref_start, ref_end] from all values.
ScenarioSeries compute_anomalies(const ScenarioSeries& series, int ref_start, int ref_end);

/// Symmetric smoothing filter applied to the covariate series.
struct SmootherSpec {
  std::vector<double> weights;  ///< symmetric, positive, sums to 1, odd length

  /// 13-point binomial filter: weights C(12,k)/4096.
  static SmootherSpec binomial13();

  std::size_t window() const { return weights.size(); }
  void validate() const;
};

/// Weighted moving average with whole-sample reflection at the endpoints
/// (index -k maps to k). Output length equals input length; input shorter
/// than the window is an error.
std::vector<double> smooth_covariate(std::span<const double> raw,
                                     const SmootherSpec& spec = SmootherSpec::binomial13());

/// Deterministic stream-split of a seed, for independent replicate RNGs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Inverse-CDF GEV draw from a uniform variate in (0, 1).
double gev_inverse_cdf(double u, const evd::EVDParams& params,
                       std::span<const double> x = {});

/// Parameters of the per-observation distribution whose annual maximum
/// over n_per_year independent draws follows the given block-scale GEV
/// (the 1/n power of the distribution; same shape, rescaled location and
/// scale). With n_per_year = 1 this is the identity.
evd::EVDParams per_observation_params(const evd::EVDParams& block_scale, double n_per_year);

/// One scenario of a synthetic study. `truth` is on the block scale the
/// point-process fit estimates (the annual ensemble-maximum GEV); member
/// draws are generated from its 1/members power so a fit with
/// n_y = members recovers `truth`.
struct ScenarioSpec {
  evd::EVDParams truth;
  int members{1};
  int first_year{1901};
  int n_years{112};
  bool use_covariate{false};
};

struct StudySpec {
  ScenarioSpec observations;
  ScenarioSpec actual;
  ScenarioSpec counterfactual;
  std::vector<double> covariate;  ///< per-year path for covariate-bearing scenarios
  double event_probability{0.0};  ///< p_A of the event definition
  int event_year{0};
  std::uint64_t seed{0};
};

struct SyntheticStudy {
  ScenarioSeries observations;
  ScenarioSeries actual;
  ScenarioSeries counterfactual;
  double true_z_A{};
  double true_p_C{};
  double true_rr{};
  double true_log2_rr{};
};

/// Draws the three scenario series and evaluates the analytic risk ratio
/// implied by the truth parameters at the event definition.
SyntheticStudy simulate_study(const StudySpec& spec);

}  // namespace evattr
