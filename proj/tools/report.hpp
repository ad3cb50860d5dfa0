// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "evattr/attribution.hpp"
#include "evattr/fit.hpp"
#include "evattr/uncertainty.hpp"

namespace evattr::cli {

using json = nlohmann::ordered_json;

/// Infinite values are rendered as the strings "inf"/"-inf" so that
/// infinite risk ratios survive serialization.
json json_real(double v);
double real_from_json(const json& j);

json to_json(const evd::EVDParams& params);
evd::EVDParams params_from_json(const json& j);

json to_json(const FitResult& fit);
FitResult fit_from_json(const json& j);

json to_json(const AttributionResult& attr);

json to_json(const IntervalResult& interval);

json to_json(const SensitivityRow& row);

}  // namespace evattr::cli
