// SPDX-License-Identifier: Apache-2.0
#include "report.hpp"

#include <cmath>
#include <limits>

#include "evattr/errors.hpp"

namespace evattr::cli {

json json_real(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  if (std::isnan(v)) return json("nan");
  return json(v);
}

double real_from_json(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError("unrecognized numeric string '" + s + "'");
  }
  return j.get<double>();
}

json to_json(const evd::EVDParams& params) {
  return json{{"beta", params.beta}, {"sigma", params.sigma}, {"xi", params.xi}};
}

evd::EVDParams params_from_json(const json& j) {
  evd::EVDParams p;
  p.beta = j.at("beta").get<std::vector<double>>();
  p.sigma = j.at("sigma").get<double>();
  p.xi = j.at("xi").get<double>();
  p.validate();
  return p;
}

json to_json(const FitResult& fit) {
  json cov = json::array();
  for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < fit.covariance.cols(); ++k) {
      row.push_back(fit.covariance(i, k));
    }
    cov.push_back(row);
  }
  return json{{"params", to_json(fit.params)},
              {"loglik", json_real(fit.loglik)},
              {"threshold", fit.threshold},
              {"n_exceedances", fit.n_exceedances},
              {"n_per_year", fit.n_per_year},
              {"aic", json_real(fit.aic)},
              {"converged", fit.converged},
              {"standard_errors", fit.standard_errors()},
              {"covariance", cov},
              {"diagnostics", fit.diagnostics}};
}

FitResult fit_from_json(const json& j) {
  FitResult fit;
  fit.params = params_from_json(j.at("params"));
  fit.loglik = real_from_json(j.at("loglik"));
  fit.threshold = j.at("threshold").get<double>();
  fit.n_exceedances = j.at("n_exceedances").get<int>();
  fit.n_per_year = j.at("n_per_year").get<double>();
  fit.aic = real_from_json(j.at("aic"));
  fit.converged = j.at("converged").get<bool>();
  fit.diagnostics = j.at("diagnostics").get<std::string>();
  const auto& cov = j.at("covariance");
  const Eigen::Index n = static_cast<Eigen::Index>(cov.size());
  fit.covariance.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      fit.covariance(i, k) = cov.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
    }
  }
  return fit;
}

json to_json(const AttributionResult& attr) {
  json j{{"p_O", json_real(attr.p_O)},
         {"z_A", json_real(attr.z_A)},
         {"p_C", json_real(attr.p_C)},
         {"rr", json_real(attr.rr)},
         {"log2_rr", json_real(attr.log2_rr)},
         {"far", json_real(attr.far)},
         {"covariate_at_event", json_real(attr.covariate_at_event)},
         {"lrt_only", attr.lrt_only}};
  if (attr.p_A_raw) {
    j["no_bias_correction"] = json{{"p_A", json_real(*attr.p_A_raw)},
                                   {"p_C", json_real(*attr.p_C_raw)},
                                   {"log2_rr", json_real(*attr.log2_rr_raw)}};
  }
  if (attr.observation_fit) {
    j["observation_fit"] = to_json(*attr.observation_fit);
  }
  j["actual_fit"] = to_json(attr.actual_fit);
  j["counterfactual_fit"] = to_json(attr.counterfactual_fit);
  return j;
}

json to_json(const IntervalResult& interval) {
  json j{{"method", to_string(interval.method)},
         {"level", interval.level},
         {"lower", json_real(interval.lower)},
         {"upper", json_real(interval.upper)},
         {"point_log2", json_real(interval.point_log2)},
         {"unreliable", interval.unreliable},
         {"notes", interval.notes}};
  if (interval.method == IntervalMethod::Delta) {
    j["se_log2"] = json_real(interval.se_log2);
    j["gradient_check"] = json_real(interval.gradient_check);
  }
  if (interval.method == IntervalMethod::Bootstrap) {
    j["n_infinite"] = interval.n_infinite;
    j["n_failed"] = interval.n_failed;
  }
  return j;
}

json to_json(const SensitivityRow& row) {
  return json{{"p_A", row.p_A},
              {"z_A", json_real(row.z_A)},
              {"p_C", json_real(row.p_C)},
              {"rr", json_real(row.rr)},
              {"log2_rr", json_real(row.log2_rr)},
              {"lrt_lower_log2", json_real(row.lrt_lower_log2)},
              {"rr_lower", json_real(row.rr_lower)}};
}

}  // namespace evattr::cli
