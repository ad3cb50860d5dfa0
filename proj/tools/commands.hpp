// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evattr/attribution.hpp"
#include "evattr/series.hpp"
#include "evattr/uncertainty.hpp"
#include "report.hpp"

namespace evattr::cli {

/// Exit codes: distinct classes of failure for scripting.
enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kConfigError = 2,
  kParseError = 3,
  kFitError = 4,
  kUqError = 5,
};

struct ReferencePeriod {
  int start{};
  int end{};
};

/// Everything a run needs; assembled from defaults, an optional JSON
/// config file, and command-line overrides (in that order).
struct RunConfig {
  std::optional<std::string> observations_path;
  std::optional<std::string> actual_path;
  std::optional<std::string> counterfactual_path;
  std::optional<double> event_magnitude;
  std::optional<double> event_probability;
  int event_year{0};
  std::optional<ReferencePeriod> reference_period;
  bool smooth_covariate{false};
  PipelineConfig pipeline;
  std::vector<std::string> uq_methods{"delta", "bootstrap", "lrt_pc_only", "lrt_joint"};
  BootstrapConfig bootstrap;
  LRTConfig lrt;
  std::vector<double> sensitivity_p{0.200, 0.100, 0.050, 0.032, 0.023, 0.010};
  std::uint64_t seed{0};
  int threads{1};
  std::string out_dir{"out"};

  EventDefinition event() const;
  json to_json() const;
};

/// Parses a JSON config file into `config`, leaving absent keys alone.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Loads, validates, and (optionally) anomaly-references one scenario.
ScenarioSeries load_scenario(const RunConfig& config, Scenario scenario);

int cmd_fit(const RunConfig& config, const std::string& scenario_name);
int cmd_attribute(const RunConfig& config);
int cmd_uncertainty(const RunConfig& config);
int cmd_sensitivity(const RunConfig& config);
int cmd_diagnose(const RunConfig& config);
int cmd_simulate(const RunConfig& config, const std::filesystem::path& manifest_path);

/// Maps a thrown error to the documented exit code, printing the message
/// to stderr.
int run_guarded(const std::function<int()>& body);

}  // namespace evattr::cli
