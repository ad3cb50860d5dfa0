// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "evattr/errors.hpp"
#include "table.hpp"

namespace evattr::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string mode_name(CovariateMode mode) {
  return mode == CovariateMode::LinearInCovariate ? "linear" : "stationary";
}

CovariateMode mode_from_name(const std::string& name) {
  if (name == "linear") return CovariateMode::LinearInCovariate;
  if (name == "stationary") return CovariateMode::Stationary;
  throw InvalidInputError("unknown covariate mode '" + name +
                          "' (expected 'linear' or 'stationary')");
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "observations" || name == "observation" || name == "obs") {
    return Scenario::Observation;
  }
  if (name == "actual") return Scenario::Actual;
  if (name == "counterfactual" || name == "cf") return Scenario::Counterfactual;
  throw InvalidInputError("unknown scenario '" + name + "'");
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

fs::path prepare_out_dir(const RunConfig& config) {
  fs::path dir(config.out_dir);
  fs::create_directories(dir);
  return dir;
}

CovariateMode mode_for(const RunConfig& config, Scenario scenario) {
  switch (scenario) {
    case Scenario::Observation:
      return config.pipeline.observation_mode;
    case Scenario::Actual:
      return config.pipeline.actual_mode;
    case Scenario::Counterfactual:
      return config.pipeline.counterfactual_mode;
  }
  return CovariateMode::Stationary;
}

Table fit_table(const FitResult& fit) {
  Table t({"parameter", "estimate", "std_error"});
  const auto se = fit.standard_errors();
  const auto& beta = fit.params.beta;
  for (std::size_t k = 0; k < beta.size(); ++k) {
    t.add_row({"beta" + std::to_string(k), format_number(beta[k]), format_number(se[k])});
  }
  t.add_row({"sigma", format_number(fit.params.sigma), format_number(se[beta.size()])});
  t.add_row({"xi", format_number(fit.params.xi), format_number(se[beta.size() + 1])});
  return t;
}

std::string fit_summary(const FitResult& fit, const std::string& scenario) {
  std::ostringstream out;
  out << "# fit: " << scenario << "\n"
      << "threshold          " << format_number(fit.threshold) << "\n"
      << "n_exceedances      " << fit.n_exceedances << "\n"
      << "observations/year  " << format_number(fit.n_per_year) << "\n"
      << "log_likelihood     " << format_number(fit.loglik) << "\n"
      << "aic                " << format_number(fit.aic) << "\n"
      << "converged          " << (fit.converged ? "yes" : "no") << "\n";
  if (!fit.diagnostics.empty()) out << "diagnostics        " << fit.diagnostics << "\n";
  out << "\n" << fit_table(fit).aligned();
  return out.str();
}

EventDefinition event_or_throw(const RunConfig& config) {
  const auto event = config.event();
  event.validate();
  return event;
}

struct LoadedStudy {
  ScenarioSeries actual;
  ScenarioSeries counterfactual;
  std::optional<ScenarioSeries> observations;
};

LoadedStudy load_study(const RunConfig& config, bool need_observations) {
  LoadedStudy study;
  study.actual = load_scenario(config, Scenario::Actual);
  study.counterfactual = load_scenario(config, Scenario::Counterfactual);
  if (need_observations) {
    study.observations = load_scenario(config, Scenario::Observation);
  }
  return study;
}

AttributionResult attribute(const RunConfig& config, const LoadedStudy& study,
                            const EventDefinition& event) {
  if (event.magnitude) {
    return run_attribution(*study.observations, study.actual, study.counterfactual, event,
                           config.pipeline);
  }
  return run_attribution(study.actual, study.counterfactual, event, config.pipeline);
}

}  // namespace

EventDefinition RunConfig::event() const {
  EventDefinition e;
  e.magnitude = event_magnitude;
  e.probability = event_probability;
  e.year = event_year;
  return e;
}

json RunConfig::to_json() const {
  json event_j;
  if (event_magnitude) event_j["magnitude"] = *event_magnitude;
  if (event_probability) event_j["probability"] = *event_probability;
  event_j["year"] = event_year;

  json j{{"observations", observations_path ? json(*observations_path) : json()},
         {"actual", actual_path ? json(*actual_path) : json()},
         {"counterfactual", counterfactual_path ? json(*counterfactual_path) : json()},
         {"event", event_j},
         {"threshold_quantile", pipeline.fit.threshold_quantile},
         {"covariate_modes",
          json{{"observations", mode_name(pipeline.observation_mode)},
               {"actual", mode_name(pipeline.actual_mode)},
               {"counterfactual", mode_name(pipeline.counterfactual_mode)}}},
         {"smooth_covariate", smooth_covariate},
         {"uq_methods", uq_methods},
         {"bootstrap",
          json{{"replicates", bootstrap.replicates},
               {"resample_members", bootstrap.resample_members},
               {"resample_years", bootstrap.resample_years},
               {"per_member_years", bootstrap.per_member_years}}},
         {"lrt",
          json{{"chisq_crit", lrt.chisq_crit},
               {"log2_floor", lrt.log2_floor},
               {"log2_cap", lrt.log2_cap},
               {"tol_log2", lrt.tol_log2},
               {"penalty_c", lrt.penalty_c}}},
         {"sensitivity_p", sensitivity_p},
         {"seed", seed},
         {"threads", threads},
         {"out", out_dir}};
  if (reference_period) {
    j["reference_period"] = json{{"start", reference_period->start},
                                 {"end", reference_period->end}};
  }
  return j;
}

void apply_config_file(RunConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInputError("config file " + path.string() + ": " + e.what());
  }

  try {
    if (j.contains("observations")) config.observations_path = j["observations"].get<std::string>();
    if (j.contains("actual")) config.actual_path = j["actual"].get<std::string>();
    if (j.contains("counterfactual")) {
      config.counterfactual_path = j["counterfactual"].get<std::string>();
    }
    if (j.contains("event")) {
      const auto& e = j["event"];
      if (e.contains("magnitude")) config.event_magnitude = e["magnitude"].get<double>();
      if (e.contains("probability")) config.event_probability = e["probability"].get<double>();
      if (e.contains("year")) config.event_year = e["year"].get<int>();
    }
    if (j.contains("reference_period")) {
      const auto& r = j["reference_period"];
      config.reference_period = ReferencePeriod{r.at("start").get<int>(), r.at("end").get<int>()};
    }
    if (j.contains("threshold_quantile")) {
      config.pipeline.fit.threshold_quantile = j["threshold_quantile"].get<double>();
    }
    if (j.contains("covariate_modes")) {
      const auto& m = j["covariate_modes"];
      if (m.contains("observations")) {
        config.pipeline.observation_mode = mode_from_name(m["observations"].get<std::string>());
      }
      if (m.contains("actual")) {
        config.pipeline.actual_mode = mode_from_name(m["actual"].get<std::string>());
      }
      if (m.contains("counterfactual")) {
        config.pipeline.counterfactual_mode =
            mode_from_name(m["counterfactual"].get<std::string>());
      }
    }
    if (j.contains("smooth_covariate")) {
      config.smooth_covariate = j["smooth_covariate"].get<bool>();
    }
    if (j.contains("uq_methods")) {
      config.uq_methods = j["uq_methods"].get<std::vector<std::string>>();
    }
    if (j.contains("bootstrap")) {
      const auto& b = j["bootstrap"];
      if (b.contains("replicates")) config.bootstrap.replicates = b["replicates"].get<int>();
      if (b.contains("resample_members")) {
        config.bootstrap.resample_members = b["resample_members"].get<bool>();
      }
      if (b.contains("resample_years")) {
        config.bootstrap.resample_years = b["resample_years"].get<bool>();
      }
      if (b.contains("per_member_years")) {
        config.bootstrap.per_member_years = b["per_member_years"].get<bool>();
      }
    }
    if (j.contains("lrt")) {
      const auto& l = j["lrt"];
      if (l.contains("chisq_crit")) config.lrt.chisq_crit = l["chisq_crit"].get<double>();
      if (l.contains("log2_floor")) config.lrt.log2_floor = l["log2_floor"].get<double>();
      if (l.contains("log2_cap")) config.lrt.log2_cap = l["log2_cap"].get<double>();
      if (l.contains("tol_log2")) config.lrt.tol_log2 = l["tol_log2"].get<double>();
      if (l.contains("penalty_c")) config.lrt.penalty_c = l["penalty_c"].get<double>();
    }
    if (j.contains("sensitivity_p")) {
      config.sensitivity_p = j["sensitivity_p"].get<std::vector<double>>();
    }
    if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) config.threads = j["threads"].get<int>();
    if (j.contains("out")) config.out_dir = j["out"].get<std::string>();
  } catch (const json::exception& e) {
    throw InvalidInputError("config file " + path.string() + ": " + e.what());
  }
}

ScenarioSeries load_scenario(const RunConfig& config, Scenario scenario) {
  const std::optional<std::string>* path = nullptr;
  switch (scenario) {
    case Scenario::Observation:
      path = &config.observations_path;
      break;
    case Scenario::Actual:
      path = &config.actual_path;
      break;
    case Scenario::Counterfactual:
      path = &config.counterfactual_path;
      break;
  }
  if (!path || !*path) {
    throw InvalidInputError("no input file configured for the " + to_string(scenario) +
                            " series");
  }
  ScenarioSeries series = load_series(**path, scenario);
  if (config.reference_period) {
    series = compute_anomalies(series, config.reference_period->start,
                               config.reference_period->end);
  }
  if (config.smooth_covariate && series.covariate) {
    series.covariate = smooth_covariate(*series.covariate);
  }
  return series;
}

int cmd_fit(const RunConfig& config, const std::string& scenario_name) {
  const Scenario scenario = scenario_from_name(scenario_name);
  const auto series = load_scenario(config, scenario);
  FitConfig fit_config = config.pipeline.fit;
  fit_config.covariate_mode = mode_for(config, scenario);
  const auto fit = fit_pp(series, fit_config);

  const auto dir = prepare_out_dir(config);
  const std::string tag = to_string(scenario);
  const std::string text = fit_summary(fit, tag);
  write_text(dir / ("fit_" + tag + ".txt"), text);
  write_text(dir / ("fit_" + tag + ".csv"), fit_table(fit).csv());
  write_json(dir / ("fit_" + tag + ".json"),
             json{{"config", config.to_json()}, {"scenario", tag}, {"fit", to_json(fit)}});
  std::cout << text;
  return kOk;
}

int cmd_attribute(const RunConfig& config) {
  const auto event = event_or_throw(config);
  const auto study = load_study(config, event.magnitude.has_value());
  const auto attr = attribute(config, study, event);

  Table t({"quantity", "value"});
  t.add_row({"p_O", format_number(attr.p_O)});
  t.add_row({"z_A", format_number(attr.z_A)});
  t.add_row({"p_C", format_number(attr.p_C)});
  t.add_row({"rr", format_number(attr.rr)});
  t.add_row({"log2_rr", format_number(attr.log2_rr)});
  t.add_row({"far", format_number(attr.far)});
  t.add_row({"covariate_at_event", format_number(attr.covariate_at_event)});
  t.add_row({"lrt_only", attr.lrt_only ? "yes" : "no"});
  if (attr.log2_rr_raw) {
    t.add_row({"p_A_no_correction", format_number(*attr.p_A_raw)});
    t.add_row({"p_C_no_correction", format_number(*attr.p_C_raw)});
    t.add_row({"log2_rr_no_correction", format_number(*attr.log2_rr_raw)});
  }

  std::ostringstream text;
  text << "# attribution\n" << t.aligned();
  if (attr.lrt_only) {
    text << "\nnote: p_C = 0; only the LRT lower bound is a valid interval here\n";
  }

  const auto dir = prepare_out_dir(config);
  write_text(dir / "attribution.txt", text.str());
  write_text(dir / "attribution.csv", t.csv());
  write_json(dir / "attribution.json",
             json{{"config", config.to_json()}, {"attribution", to_json(attr)}});
  std::cout << text.str();
  return kOk;
}

int cmd_uncertainty(const RunConfig& config) {
  const auto event = event_or_throw(config);
  const auto study = load_study(config, event.magnitude.has_value());
  const auto attr = attribute(config, study, event);

  BootstrapConfig boot = config.bootstrap;
  boot.seed = config.seed;
  boot.threads = config.threads;

  std::vector<json> rows;
  Table t({"method", "level", "lower_log2", "upper_log2", "point_log2", "notes"});
  std::optional<double> joint_lower, pc_only_lower;

  for (const auto& name : config.uq_methods) {
    json row;
    try {
      IntervalResult interval;
      if (name == "delta") {
        interval = delta_interval(attr);
      } else if (name == "bootstrap") {
        interval = bootstrap_interval(attr.p_O, event.year, study.actual,
                                      study.counterfactual, config.pipeline, boot);
      } else if (name == "lrt_pc_only" || name == "lrt_joint") {
        const LrtMode mode = name == "lrt_joint" ? LrtMode::Joint : LrtMode::PcOnly;
        LrtProblem problem(study.actual, study.counterfactual, attr.p_O, event.year,
                           config.pipeline, mode, attr.actual_fit, attr.counterfactual_fit);
        interval = lrt_lower_bound(problem, config.lrt);
        (mode == LrtMode::Joint ? joint_lower : pc_only_lower) = interval.lower;
      } else {
        throw InvalidInputError("unknown uncertainty method '" + name + "'");
      }
      row = to_json(interval);
      t.add_row({to_string(interval.method), format_number(interval.level),
                 format_number(interval.lower), format_number(interval.upper),
                 format_number(interval.point_log2), interval.notes});
    } catch (const Error& e) {
      row = json{{"method", name}, {"error", e.what()}};
      t.add_row({name, "-", "-", "-", "-", std::string("inapplicable: ") + e.what()});
    }
    rows.push_back(std::move(row));
  }

  std::ostringstream text;
  text << "# uncertainty (log2 scale)\n" << t.aligned();
  if (joint_lower && pc_only_lower) {
    text << "\nordering check: joint lower bound "
         << (*joint_lower <= *pc_only_lower + 2.0 * config.lrt.tol_log2 ? "<=" : "> (!)")
         << " pc-only lower bound\n";
  }

  const auto dir = prepare_out_dir(config);
  write_text(dir / "uncertainty.txt", text.str());
  write_text(dir / "uncertainty.csv", t.csv());
  write_json(dir / "uncertainty.json", json{{"config", config.to_json()},
                                            {"point_log2", json_real(attr.log2_rr)},
                                            {"intervals", rows}});
  std::cout << text.str();
  return kOk;
}

int cmd_sensitivity(const RunConfig& config) {
  const auto event = event_or_throw(config);
  const auto study = load_study(config, false);
  const auto rows = sensitivity_sweep(study.actual, study.counterfactual, config.event_year,
                                      config.sensitivity_p, config.pipeline, config.lrt);

  Table t({"p_A", "z_A", "p_C", "log2_rr", "ci_lower_log2", "rr_lower"});
  json rows_j = json::array();
  for (const auto& row : rows) {
    t.add_row({format_number(row.p_A), format_number(row.z_A), format_number(row.p_C),
               format_number(row.log2_rr), format_number(row.lrt_lower_log2),
               format_number(row.rr_lower)});
    rows_j.push_back(to_json(row));
  }

  std::ostringstream text;
  text << "# sensitivity to the event definition (one-sided 95% CI)\n" << t.aligned();
  const auto dir = prepare_out_dir(config);
  write_text(dir / "sensitivity.txt", text.str());
  write_text(dir / "sensitivity.csv", t.csv());
  write_json(dir / "sensitivity.json",
             json{{"config", config.to_json()}, {"rows", rows_j}});
  std::cout << text.str();
  return kOk;
}

int cmd_diagnose(const RunConfig& config) {
  const auto dir = prepare_out_dir(config);
  json summary;
  std::ostringstream text;
  text << "# diagnostics\n";

  const std::vector<Scenario> scenarios{Scenario::Observation, Scenario::Actual,
                                        Scenario::Counterfactual};
  for (Scenario scenario : scenarios) {
    ScenarioSeries series;
    try {
      series = load_scenario(config, scenario);
    } catch (const InvalidInputError&) {
      continue;  // scenario not configured
    }
    const std::string tag = to_string(scenario);

    // mean residual life over a quantile ladder
    std::vector<double> thresholds;
    for (double q = 0.50; q <= 0.975; q += 0.02) {
      thresholds.push_back(empirical_quantile(series.pooled(), q));
    }
    const auto mrl = mean_residual_life(series, thresholds);
    Table mrl_table({"threshold", "mean_excess", "std_error", "count"});
    for (const auto& row : mrl.rows) {
      mrl_table.add_row({format_exact(row.threshold), format_exact(row.mean_excess),
                         format_exact(row.std_error), std::to_string(row.count)});
    }
    write_text(dir / ("mrl_" + tag + ".csv"), mrl_table.csv());

    // fitted CDF curve at the event-year covariate, upper endpoint marked
    FitConfig fit_config = config.pipeline.fit;
    fit_config.covariate_mode = mode_for(config, scenario);
    const auto fit = fit_pp(series, fit_config);
    std::vector<double> x_event;
    if (!fit.params.is_stationary()) {
      x_event.push_back(series.covariate_at(config.event_year));
    }
    const auto support = evd::support_bounds(fit.params, x_event);
    const auto pooled = series.pooled();
    const double lo = *std::min_element(pooled.begin(), pooled.end());
    const double hi = std::isfinite(support.upper)
                          ? support.upper
                          : *std::max_element(pooled.begin(), pooled.end()) +
                                4.0 * fit.params.sigma;

    Table cdf_table({"z", "cdf", "at_upper_bound"});
    const int n_points = 256;
    for (int i = 0; i < n_points; ++i) {
      const double z = lo + (hi - lo) * i / n_points;
      const double cdf = 1.0 - evd::gev_exceedance_prob(z, fit.params, x_event);
      cdf_table.add_row({format_exact(z), format_exact(cdf), "0"});
    }
    cdf_table.add_row({format_exact(hi),
                       format_exact(1.0 - evd::gev_exceedance_prob(hi, fit.params, x_event)),
                       std::isfinite(support.upper) ? "1" : "0"});
    write_text(dir / ("cdf_" + tag + ".csv"), cdf_table.csv());

    summary[tag] = json{{"fit", to_json(fit)},
                        {"upper_bound", json_real(support.upper)},
                        {"files", {"mrl_" + tag + ".csv", "cdf_" + tag + ".csv"}}};
    text << tag << ": threshold " << format_number(fit.threshold) << ", upper bound "
         << format_number(support.upper) << ", files mrl_" << tag << ".csv cdf_" << tag
         << ".csv\n";
  }
  if (summary.empty()) {
    throw InvalidInputError("no input series configured; nothing to diagnose");
  }
  write_json(dir / "diagnose.json", json{{"config", config.to_json()}, {"series", summary}});
  std::cout << text.str();
  return kOk;
}

namespace {

ScenarioSpec scenario_spec_from_json(const json& j) {
  ScenarioSpec spec;
  spec.truth = params_from_json(j);
  if (j.contains("members")) spec.members = j["members"].get<int>();
  if (j.contains("first_year")) spec.first_year = j["first_year"].get<int>();
  if (j.contains("years")) spec.n_years = j["years"].get<int>();
  if (j.contains("use_covariate")) spec.use_covariate = j["use_covariate"].get<bool>();
  return spec;
}

}  // namespace

int cmd_simulate(const RunConfig& config, const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw InvalidInputError("cannot open manifest " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw InvalidInputError("manifest " + manifest_path.string() + ": " + e.what());
  }

  StudySpec spec;
  try {
    spec.observations = scenario_spec_from_json(manifest.at("observations"));
    spec.actual = scenario_spec_from_json(manifest.at("actual"));
    spec.counterfactual = scenario_spec_from_json(manifest.at("counterfactual"));
    spec.event_probability = manifest.at("event").at("probability").get<double>();
    spec.event_year = manifest.at("event").at("year").get<int>();
    spec.seed = manifest.contains("seed") ? manifest["seed"].get<std::uint64_t>() : config.seed;

    const auto& cov = manifest.at("covariate");
    const std::string type = cov.at("type").get<std::string>();
    const int n_years = std::max(spec.observations.n_years, spec.actual.n_years);
    if (type == "quadratic") {
      const double peak = cov.at("peak").get<double>();
      spec.covariate.resize(static_cast<std::size_t>(n_years));
      for (int t = 0; t < n_years; ++t) {
        const double s = static_cast<double>(t) / (n_years - 2);
        spec.covariate[static_cast<std::size_t>(t)] = peak * s * s;
      }
    } else if (type == "values") {
      spec.covariate = cov.at("values").get<std::vector<double>>();
    } else {
      throw InvalidInputError("unknown covariate type '" + type + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidInputError("manifest " + manifest_path.string() + ": " + e.what());
  }

  const auto study = simulate_study(spec);
  const auto dir = prepare_out_dir(config);
  save_series(study.observations, dir / "observations.csv");
  save_series(study.actual, dir / "actual.csv");
  save_series(study.counterfactual, dir / "counterfactual.csv");

  const json sidecar{{"manifest", manifest},
                     {"files",
                      {{"observations", "observations.csv"},
                       {"actual", "actual.csv"},
                       {"counterfactual", "counterfactual.csv"}}},
                     {"analytic_truth",
                      {{"z_A", json_real(study.true_z_A)},
                       {"p_C", json_real(study.true_p_C)},
                       {"rr", json_real(study.true_rr)},
                       {"log2_rr", json_real(study.true_log2_rr)}}}};
  write_json(dir / "study.json", sidecar);
  std::cout << "wrote observations.csv actual.csv counterfactual.csv study.json to "
            << dir.string() << "\n"
            << "analytic log2 RR: " << format_number(study.true_log2_rr) << "\n";
  return kOk;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParseError;
  } catch (const InsufficientExceedancesError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return kFitError;
  } catch (const MethodInapplicableError& e) {
    std::cerr << "uncertainty error: " << e.what() << "\n";
    return kUqError;
  } catch (const BracketError& e) {
    std::cerr << "uncertainty error: " << e.what() << "\n";
    return kUqError;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return kFitError;
  } catch (const InvalidInputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kUnexpected;
  }
}

}  // namespace evattr::cli
