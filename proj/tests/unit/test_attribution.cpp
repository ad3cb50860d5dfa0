// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "evattr/attribution.hpp"
#include "evattr/errors.hpp"
#include "evattr/uncertainty.hpp"
#include "support/synthetic.hpp"

using namespace evattr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kOneMinusInvE = 1.0 - std::exp(-1.0);

FitResult manual_fit(const evd::EVDParams& params) {
  FitResult fit;
  fit.params = params;
  fit.converged = true;
  fit.loglik = 0.0;
  fit.n_exceedances = 100;
  fit.covariance = Eigen::MatrixXd::Zero(fit.n_free(), fit.n_free());
  return fit;
}

/// Rounds every value to the 2^-26 grid so that adding a dyadic constant
/// is exact in floating point.
void quantize(ScenarioSeries& s) {
  constexpr double grid = 1 << 26;
  for (double& v : s.values) v = std::round(v * grid) / grid;
}

void shift(ScenarioSeries& s, double c) {
  for (double& v : s.values) v += c;
}

}  // namespace

TEST_CASE("event definitions require exactly one source") {
  CHECK_THROWS_AS(EventDefinition{}.validate(), InvalidInputError);
  EventDefinition both;
  both.magnitude = 1.0;
  both.probability = 0.1;
  CHECK_THROWS_AS(both.validate(), InvalidInputError);
  CHECK_NOTHROW(EventDefinition::from_magnitude(2.467, 2011).validate());
  CHECK_NOTHROW(EventDefinition::from_probability(0.032, 2011).validate());
  CHECK_THROWS_AS(EventDefinition::from_probability(1.5, 2011).validate(), InvalidInputError);
}

TEST_CASE("risk ratio arithmetic") {
  const auto r = make_risk_ratio(0.032, 1.503e-08);
  CHECK(r.log2_rr == doctest::Approx(21.0).epsilon(0.005));

  const auto inf = make_risk_ratio(0.032, 0.0);
  CHECK(inf.rr == kInf);
  CHECK(inf.log2_rr == kInf);

  const auto one = make_risk_ratio(0.25, 0.25);
  CHECK(one.log2_rr == doctest::Approx(0.0));
}

TEST_CASE("estimate_p_O identities") {
  const auto obs_fit = manual_fit(evd::EVDParams::with_trend(-0.8, 0.4, 1.25, -0.239));
  ScenarioSeries obs;
  obs.years = {2010, 2011};
  obs.members = 1;
  obs.values = {0.0, 0.0};
  obs.covariate = std::vector<double>{0.5, 0.9};

  const double mu_event = -0.8 + 0.4 * 0.9;
  const auto at_mu = EventDefinition::from_magnitude(mu_event, 2011);
  CHECK(estimate_p_O(obs_fit, at_mu, obs) == doctest::Approx(kOneMinusInvE).epsilon(1e-12));

  // at the upper support endpoint the probability is exactly zero
  const double upper = evd::support_bounds(obs_fit.params, std::vector<double>{0.9}).upper;
  const auto at_bound = EventDefinition::from_magnitude(upper, 2011);
  CHECK(estimate_p_O(obs_fit, at_bound, obs) == 0.0);

  // event year must have a covariate
  const auto outside = EventDefinition::from_magnitude(1.0, 2050);
  CHECK_THROWS_AS(estimate_p_O(obs_fit, outside, obs), InvalidInputError);

  // probability override bypasses the fit entirely
  const auto fixed = EventDefinition::from_probability(0.01, 2011);
  CHECK(estimate_p_O(obs_fit, fixed, obs) == 0.01);
}

TEST_CASE("map_to_model is the exact inverse of the exceedance probability") {
  const auto actual_fit = manual_fit(evd::EVDParams::with_trend(1.263, 1.382, 0.926, -0.197));
  ScenarioSeries actual;
  actual.years = {2011};
  actual.members = 1;
  actual.values = {0.0};
  actual.covariate = std::vector<double>{0.92};

  const double z = map_to_model(actual_fit, kOneMinusInvE, 2011, actual);
  CHECK(z == doctest::Approx(1.263 + 1.382 * 0.92).epsilon(1e-12));

  for (double p : {0.2, 0.05, 0.032, 0.001}) {
    const double za = map_to_model(actual_fit, p, 2011, actual);
    const double back =
        evd::gev_exceedance_prob(za, actual_fit.params, std::vector<double>{0.92});
    CHECK(back == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK_THROWS_AS(map_to_model(actual_fit, 0.0, 2011, actual), InvalidInputError);
  CHECK_THROWS_AS(map_to_model(actual_fit, 1.0, 2011, actual), InvalidInputError);
}

TEST_CASE("estimate_p_C at the case-study counterfactual parameters") {
  const auto cf_fit = manual_fit(evd::EVDParams::stationary(1.415, 0.638, -0.179));
  const double p = estimate_p_C(cf_fit, 4.842);
  CHECK(p >= 1.0e-8);
  CHECK(p <= 2.3e-8);
  CHECK(estimate_p_C(cf_fit, 5.0) == 0.0);    // beyond the upper endpoint (~4.979)
  CHECK(estimate_p_C(cf_fit, -100.0) == 1.0);  // far below the support
}

TEST_CASE("attribution pipeline on a heatwave-like synthetic study") {
  const auto study = simulate_study(synth::heatwave_like_study(8));
  const auto event = EventDefinition::from_magnitude(2.46875, 2011);
  PipelineConfig config;

  const auto result =
      run_attribution(study.observations, study.actual, study.counterfactual, event, config);

  CHECK(result.observation_fit.has_value());
  CHECK(result.p_O > 0.0);
  CHECK(result.p_O < 0.2);
  CHECK(result.z_A > 2.46875);  // the model runs hotter than the observations
  CHECK(result.rr > 1.0);

  // equal-rarity invariant: z_A has probability p_O under the actual fit
  const double back = evd::gev_exceedance_prob(result.z_A, result.actual_fit.params,
                                               std::vector<double>{result.covariate_at_event});
  CHECK(back == doctest::Approx(result.p_O).epsilon(1e-10));

  // without the quantile mapping the apparent ratio is much smaller
  REQUIRE(result.log2_rr_raw.has_value());
  CHECK(*result.log2_rr_raw < result.log2_rr);
  CHECK(*result.p_A_raw > result.p_O);  // the raw magnitude is not extreme in the model

  CHECK(result.far == doctest::Approx(1.0 - 1.0 / result.rr));
}

TEST_CASE("identical model series give log2 RR of exactly zero") {
  const auto study = simulate_study(synth::well_behaved_study(21));
  const auto event = EventDefinition::from_probability(0.1, 2011);
  PipelineConfig config;
  config.actual_mode = CovariateMode::Stationary;
  config.counterfactual_mode = CovariateMode::Stationary;

  const auto result = run_attribution(study.observations, study.counterfactual,
                                      study.counterfactual, event, config);
  CHECK(result.log2_rr == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("same-distribution scenarios give log2 RR near zero on average") {
  double acc = 0.0;
  int n = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    auto spec = synth::well_behaved_study(seed);
    spec.actual = spec.counterfactual;             // same truth, independent draws
    spec.actual.use_covariate = false;
    const auto study = simulate_study(spec);
    PipelineConfig config;
    config.actual_mode = CovariateMode::Stationary;
    config.counterfactual_mode = CovariateMode::Stationary;
    const auto result = run_attribution(study.observations, study.actual,
                                        study.counterfactual,
                                        EventDefinition::from_probability(0.2, 2011), config);
    acc += std::abs(result.log2_rr);
    ++n;
  }
  CHECK(acc / n < 0.5);
}

TEST_CASE("zero counterfactual probability is a first-class result") {
  const auto study = simulate_study(synth::heatwave_like_study(15));
  const auto event = EventDefinition::from_probability(0.005, 2011);
  const auto result = run_attribution(study.observations, study.actual, study.counterfactual,
                                      event, PipelineConfig{});
  REQUIRE(result.p_C == 0.0);
  CHECK(result.rr == kInf);
  CHECK(result.log2_rr == kInf);
  CHECK(result.lrt_only);
  CHECK(result.far == 1.0);
  CHECK(!result.observation_fit.has_value());  // override path skips the obs fit
}

TEST_CASE("adding a constant to all series and the event leaves log2 RR unchanged") {
  // sizes chosen so the 0.8-quantile index (n-1)q is an integer and the
  // dyadic shift of quantized values stays exact through the threshold
  auto spec = synth::well_behaved_study(33);
  spec.observations.n_years = 111;
  spec.actual.n_years = 111;
  spec.counterfactual.n_years = 97;
  spec.covariate = synth::ramp_covariate(111, 0.90);
  spec.event_year = 2010;

  auto study = simulate_study(spec);
  quantize(study.observations);
  quantize(study.actual);
  quantize(study.counterfactual);

  const double c = 3.75;
  auto shifted_obs = study.observations;
  auto shifted_actual = study.actual;
  auto shifted_cf = study.counterfactual;
  shift(shifted_obs, c);
  shift(shifted_actual, c);
  shift(shifted_cf, c);

  const double z0 = 2.03125;
  PipelineConfig config;
  const auto base = run_attribution(study.observations, study.actual, study.counterfactual,
                                    EventDefinition::from_magnitude(z0, 2010), config);
  const auto moved = run_attribution(shifted_obs, shifted_actual, shifted_cf,
                                     EventDefinition::from_magnitude(z0 + c, 2010), config);

  CHECK(moved.p_O == doctest::Approx(base.p_O).epsilon(1e-10));
  CHECK(moved.z_A - c == doctest::Approx(base.z_A).epsilon(1e-9));
  CHECK(std::abs(moved.log2_rr - base.log2_rr) < 1e-8);
}

TEST_CASE("sensitivity sweep is monotone and ordered") {
  const auto study = simulate_study(synth::well_behaved_study(5));
  const std::vector<double> ps{0.05, 0.2, 0.1};
  const auto rows = sensitivity_sweep(study.actual, study.counterfactual, 2011, ps,
                                      PipelineConfig{}, LRTConfig{});
  REQUIRE(rows.size() == 3);
  // descending in p_A
  CHECK(rows[0].p_A == 0.2);
  CHECK(rows[2].p_A == 0.05);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].z_A > rows[i - 1].z_A);         // z_A strictly decreasing in p_A
    CHECK(rows[i].p_C <= rows[i - 1].p_C);        // p_C non-increasing as z_A rises
    CHECK(rows[i].log2_rr >= rows[i - 1].log2_rr);
  }
  for (const auto& row : rows) {
    CHECK(row.lrt_lower_log2 <= row.log2_rr);
    CHECK(row.rr_lower == doctest::Approx(std::exp2(row.lrt_lower_log2)));
  }
}
