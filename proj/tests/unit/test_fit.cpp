// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "evattr/errors.hpp"
#include "evattr/fit.hpp"
#include "evattr/optim.hpp"
#include "evattr/series.hpp"
#include "support/synthetic.hpp"

using namespace evattr;

namespace {

ScenarioSeries stationary_ensemble(const evd::EVDParams& truth, int members, int years,
                                   std::uint64_t seed) {
  StudySpec spec;
  spec.observations.truth = truth;
  spec.observations.members = 1;
  spec.observations.n_years = 30;
  spec.actual.truth = truth;
  spec.actual.members = 1;
  spec.actual.n_years = 30;
  spec.counterfactual.truth = truth;
  spec.counterfactual.members = members;
  spec.counterfactual.n_years = years;
  spec.event_probability = 0.05;
  spec.event_year = 1901;
  spec.seed = seed;
  return simulate_study(spec).counterfactual;
}

}  // namespace

TEST_CASE("threshold selection follows the order-statistic interpolation rule") {
  ScenarioSeries s;
  s.years = {1, 2, 3, 4, 5};
  s.members = 1;
  s.values = {5.0, 3.0, 1.0, 2.0, 4.0};
  CHECK(select_threshold(s, 0.8) == doctest::Approx(4.2).epsilon(1e-14));

  ScenarioSeries med;
  med.years = {1, 2, 3};
  med.members = 1;
  med.values = {3.0, 1.0, 2.0};
  CHECK(select_threshold(med, 0.5) == doctest::Approx(2.0).epsilon(1e-14));

  ScenarioSeries flat;
  flat.years = {1, 2, 3, 4};
  flat.members = 2;
  flat.values.assign(8, 7.5);
  CHECK(select_threshold(flat, 0.3) == 7.5);
  CHECK(select_threshold(flat, 0.97) == 7.5);
}

TEST_CASE("stationary fit recovers the generating parameters") {
  const auto truth = evd::EVDParams::stationary(1.4, 0.64, -0.18);
  const auto series = stationary_ensemble(truth, 12, 100, 2024);  // 1200 pooled values

  FitConfig cfg;
  cfg.covariate_mode = CovariateMode::Stationary;
  const auto fit = fit_pp(series, cfg);
  REQUIRE(fit.converged);
  const auto se = fit.standard_errors();

  CHECK(std::abs(fit.params.beta[0] - 1.4) < 3.0 * se[0]);
  CHECK(std::abs(fit.params.sigma - 0.64) < 3.0 * se[1]);
  CHECK(std::abs(fit.params.xi - (-0.18)) < 3.0 * se[2]);
  CHECK(fit.n_exceedances == 240);
  CHECK(fit.threshold == doctest::Approx(select_threshold(series, 0.8)));
}

TEST_CASE("fit gradient vanishes at the reported optimum") {
  const auto truth = evd::EVDParams::stationary(0.9, 0.8, -0.12);
  const auto series = stationary_ensemble(truth, 6, 90, 7);
  FitConfig cfg;
  const auto fit = fit_pp(series, cfg);
  REQUIRE(fit.converged);

  const auto set = make_exceedance_set(series, fit.threshold, CovariateMode::Stationary);
  const auto loglik = [&](std::span<const double> psi) {
    evd::EVDParams p;
    p.beta = {psi[0]};
    p.sigma = psi[1];
    p.xi = psi[2];
    if (!(p.sigma > 0.0)) return -std::numeric_limits<double>::infinity();
    return evd::pp_log_likelihood(set, p);
  };
  const std::vector<double> at{fit.params.beta[0], fit.params.sigma, fit.params.xi};
  const auto grad = optim::central_gradient(loglik, at, 1e-5, 1e-8);
  const double scale = std::abs(fit.loglik);
  for (double g : grad) {
    CHECK(std::abs(g) < 1e-3 * std::max(1.0, scale));
  }
}

TEST_CASE("AIC identity holds exactly") {
  const auto truth = evd::EVDParams::stationary(1.0, 0.7, -0.15);
  const auto series = stationary_ensemble(truth, 4, 80, 99);
  const auto fit = fit_pp(series, FitConfig{});
  CHECK(fit.aic - (2.0 * fit.n_free() - 2.0 * fit.loglik) == 0.0);
}

TEST_CASE("covariate carrying no signal: stationary model usually wins on AIC") {
  const auto truth = evd::EVDParams::stationary(1.415, 0.638, -0.179);
  int stationary_wins = 0;
  int usable = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto series = stationary_ensemble(truth, 12, 100, 5000 + static_cast<std::uint64_t>(rep));
    // attach an uninformative covariate ramp
    series.covariate = synth::ramp_covariate(static_cast<int>(series.year_count()), 0.9);

    FitConfig cfg;
    cfg.covariate_mode = CovariateMode::Stationary;
    const auto fs = fit_pp(series, cfg);
    cfg.covariate_mode = CovariateMode::LinearInCovariate;
    const auto fn = fit_pp(series, cfg);
    if (!fs.converged || !fn.converged) continue;
    ++usable;
    if (compare_aic(fs, fn).stationary_preferred) ++stationary_wins;
  }
  CHECK(usable >= 90);
  CHECK(stationary_wins * 2 > usable);  // majority
}

TEST_CASE("AIC comparison bookkeeping") {
  FitResult stat, nonstat;
  stat.aic = 152.93;
  stat.converged = true;
  stat.threshold = 0.856;
  stat.n_per_year = 1.0;
  stat.n_exceedances = 23;
  stat.params = evd::EVDParams::stationary(0.0, 1.0, -0.1);
  nonstat = stat;
  nonstat.aic = 154.14;
  nonstat.params = evd::EVDParams::with_trend(0.0, 0.4, 1.0, -0.1);

  const auto pref = compare_aic(stat, nonstat);
  CHECK(pref.stationary_preferred);
  CHECK(pref.delta_aic == doctest::Approx(154.14 - 152.93));

  nonstat.aic = 152.93;  // exact tie: fewer parameters win
  CHECK(compare_aic(stat, nonstat).stationary_preferred);

  nonstat.aic = 150.0;
  CHECK_FALSE(compare_aic(stat, nonstat).stationary_preferred);

  nonstat.threshold = 0.9;  // different dataset
  CHECK_THROWS_AS(compare_aic(stat, nonstat), InvalidInputError);

  nonstat.threshold = 0.856;
  nonstat.converged = false;
  CHECK_THROWS_AS(compare_aic(stat, nonstat), InvalidInputError);
}

TEST_CASE("degenerate data never produce a silent NaN") {
  // exceedances all equal: either a fit error or a non-converged flag
  ScenarioSeries s;
  s.members = 1;
  s.years.resize(50);
  s.values.resize(50);
  for (int t = 0; t < 50; ++t) {
    s.years[static_cast<std::size_t>(t)] = 1900 + t;
    s.values[static_cast<std::size_t>(t)] = t < 40 ? -1.0 - 0.01 * t : 3.0;
  }
  try {
    const auto fit = fit_pp(s, FitConfig{});
    CHECK_FALSE(fit.converged);
    CHECK_FALSE(std::isnan(fit.loglik));
    CHECK_FALSE(std::isnan(fit.params.sigma));
  } catch (const FitError&) {
    CHECK(true);
  }
}

TEST_CASE("too little data is rejected up front") {
  ScenarioSeries s;
  s.members = 1;
  s.years = {1, 2, 3, 4, 5};
  s.values = {1, 2, 3, 4, 5};
  CHECK_THROWS_AS(fit_pp(s, FitConfig{}), InvalidInputError);

  // enough pooled values but nearly all ties at the threshold
  ScenarioSeries t;
  t.members = 1;
  t.years.resize(40);
  t.values.assign(40, 1.0);
  for (int i = 0; i < 40; ++i) t.years[static_cast<std::size_t>(i)] = 1900 + i;
  t.values[39] = 2.0;
  t.values[38] = 2.1;
  CHECK_THROWS_AS(fit_pp(t, FitConfig{}), InsufficientExceedancesError);
}

TEST_CASE("linear covariate mode requires a covariate") {
  const auto truth = evd::EVDParams::stationary(1.0, 0.7, -0.1);
  const auto series = stationary_ensemble(truth, 4, 60, 3);
  FitConfig cfg;
  cfg.covariate_mode = CovariateMode::LinearInCovariate;
  CHECK_THROWS_AS(fit_pp(series, cfg), InvalidInputError);
}

TEST_CASE("nonstationary fit recovers a trend in the location") {
  auto spec = synth::heatwave_like_study(314);
  const auto study = simulate_study(spec);

  FitConfig cfg;
  cfg.covariate_mode = CovariateMode::LinearInCovariate;
  const auto fit = fit_pp(study.actual, cfg);
  REQUIRE(fit.converged);
  const auto se = fit.standard_errors();
  CHECK(fit.params.beta.size() == 2);
  CHECK(std::abs(fit.params.beta[0] - 1.263) < 4.0 * se[0]);
  CHECK(std::abs(fit.params.beta[1] - 1.382) < 4.0 * se[1]);
  CHECK(std::abs(fit.params.sigma - 0.926) < 4.0 * se[2]);
  CHECK(std::abs(fit.params.xi - (-0.197)) < 4.0 * se[3]);
}

TEST_CASE("standard errors shrink like the square root of the sample size") {
  const auto truth = evd::EVDParams::stationary(1.2, 0.8, -0.15);
  const int reps = 12;
  std::vector<double> mean_se(3, 0.0);

  std::vector<std::vector<double>> se_by_n;
  int n_index = 0;
  for (int n : {500, 2000, 8000}) {
    std::vector<double> acc(3, 0.0);
    int used = 0;
    for (int r = 0; r < reps; ++r) {
      const auto series = stationary_ensemble(
          truth, 4, n / 4, 777 + static_cast<std::uint64_t>(n * 31 + r));
      const auto fit = fit_pp(series, FitConfig{});
      if (!fit.converged) continue;
      const auto se = fit.standard_errors();
      for (int k = 0; k < 3; ++k) acc[static_cast<std::size_t>(k)] += se[static_cast<std::size_t>(k)];
      ++used;
    }
    REQUIRE(used > reps / 2);
    for (auto& v : acc) v /= used;
    se_by_n.push_back(acc);
    ++n_index;
  }
  for (int k = 0; k < 3; ++k) {
    const double r1 = se_by_n[1][static_cast<std::size_t>(k)] / se_by_n[0][static_cast<std::size_t>(k)];
    const double r2 = se_by_n[2][static_cast<std::size_t>(k)] / se_by_n[1][static_cast<std::size_t>(k)];
    CHECK(r1 > 0.4);
    CHECK(r1 < 0.6);
    CHECK(r2 > 0.4);
    CHECK(r2 < 0.6);
  }
}

TEST_CASE("mean residual life table") {
  ScenarioSeries s;
  s.members = 1;
  s.years = {1, 2, 3};
  s.values = {1.0, 2.0, 3.0};
  const std::vector<double> us{1.5, 10.0};
  const auto table = mean_residual_life(s, us);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].mean_excess == doctest::Approx(1.0));
  CHECK(table.rows[0].count == 2);
  CHECK(table.rows[1].count == 0);  // above the maximum: flagged, not an error
  CHECK(std::isnan(table.rows[1].mean_excess));
}

TEST_CASE("mean excess of exponential data is flat in the threshold") {
  std::mt19937_64 rng(4242);
  std::exponential_distribution<double> expo(1.0 / 1.7);  // mean excess 1.7 at any u
  ScenarioSeries s;
  s.members = 1;
  const int n = 20000;
  s.years.resize(n);
  s.values.resize(n);
  for (int i = 0; i < n; ++i) {
    s.years[static_cast<std::size_t>(i)] = i;
    s.values[static_cast<std::size_t>(i)] = expo(rng);
  }
  const std::vector<double> us{0.5, 1.0, 1.5, 2.0, 2.5};
  const auto table = mean_residual_life(s, us);
  for (const auto& row : table.rows) {
    REQUIRE(row.count > 100);
    CHECK(std::abs(row.mean_excess - 1.7) < 2.0 * row.std_error + 0.05);
  }
  // counts are non-increasing and thresholds strictly increasing
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    CHECK(table.rows[i].threshold > table.rows[i - 1].threshold);
    CHECK(table.rows[i].count <= table.rows[i - 1].count);
  }
}

TEST_CASE("Wald coverage of the stationary fit is near nominal") {
  // smaller companion of the acceptance-suite run; the higher threshold
  // keeps the exceedances in the regime where the point-process
  // approximation of exact-GEV draws is sharp
  const auto truth = evd::EVDParams::stationary(1.415, 0.638, -0.179);
  FitConfig cfg;
  cfg.threshold_quantile = 0.95;
  int covered[3] = {0, 0, 0};
  int usable = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const auto series = stationary_ensemble(truth, 12, 100, 9000 + static_cast<std::uint64_t>(rep));
    const auto fit = fit_pp(series, cfg);
    if (!fit.converged) continue;
    ++usable;
    const auto se = fit.standard_errors();
    const double t[3] = {truth.beta[0], truth.sigma, truth.xi};
    const double e[3] = {fit.params.beta[0], fit.params.sigma, fit.params.xi};
    for (int k = 0; k < 3; ++k) {
      if (std::abs(e[k] - t[k]) <= 1.96 * se[static_cast<std::size_t>(k)]) ++covered[k];
    }
  }
  REQUIRE(usable >= 55);
  for (int k = 0; k < 3; ++k) {
    const double cov = static_cast<double>(covered[k]) / usable;
    CHECK(cov > 0.82);  // loose gate at this replicate count
  }
}
