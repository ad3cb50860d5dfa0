// SPDX-License-Identifier: Apache-2.0
#include "evattr/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "evattr/errors.hpp"

namespace evattr {

namespace {

std::string loc(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

double parse_double(const std::string& field, const std::filesystem::path& path,
                    std::size_t line, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError(loc(path, line) + "cannot parse " + what + " '" + field + "'");
  }
}

int parse_int(const std::string& field, const std::filesystem::path& path,
              std::size_t line, const char* what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError(loc(path, line) + "cannot parse " + what + " '" + field + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Observation:
      return "observation";
    case Scenario::Actual:
      return "actual";
    case Scenario::Counterfactual:
      return "counterfactual";
  }
  return "unknown";
}

std::size_t ScenarioSeries::index_of_year(int year) const {
  const auto it = std::lower_bound(years.begin(), years.end(), year);
  if (it == years.end() || *it != year) {
    throw InvalidInputError("year " + std::to_string(year) + " not present in the " +
                            to_string(scenario) + " series");
  }
  return static_cast<std::size_t>(it - years.begin());
}

double ScenarioSeries::covariate_at(int year) const {
  if (!covariate) {
    throw InvalidInputError("the " + to_string(scenario) + " series carries no covariate");
  }
  return (*covariate)[index_of_year(year)];
}

void ScenarioSeries::validate() const {
  if (years.empty() || members < 1) {
    throw InvalidInputError("series must have at least one year and one member");
  }
  if (!std::is_sorted(years.begin(), years.end()) ||
      std::adjacent_find(years.begin(), years.end()) != years.end()) {
    throw InvalidInputError("years must be strictly ascending");
  }
  if (values.size() != years.size() * static_cast<std::size_t>(members)) {
    throw InvalidInputError("value matrix does not match members x years");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInputError("series contains non-finite values");
  }
  if (covariate) {
    if (covariate->size() != years.size()) {
      throw InvalidInputError("covariate must have one entry per year");
    }
    for (double v : *covariate) {
      if (!std::isfinite(v)) throw InvalidInputError("covariate contains non-finite values");
    }
  }
}

ScenarioSeries load_series(const std::filesystem::path& path, Scenario tag) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError(path.string() + ": cannot open file");
  }

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw ParseError(path.string() + ": empty file");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  const bool has_covariate = header.size() == 4;
  if ((header.size() != 3 && header.size() != 4) || header[0] != "year" ||
      header[1] != "member" || header[2] != "value" ||
      (has_covariate && header[3] != "covariate")) {
    throw ParseError(loc(path, line_no) +
                     "expected header 'year,member,value[,covariate]'");
  }

  struct Cell {
    double value;
    std::size_t line;
  };
  std::map<std::pair<int, int>, Cell> cells;  // (year, member) -> value
  std::map<int, std::pair<double, std::size_t>> year_covariate;
  std::set<int> member_ids;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw ParseError(loc(path, line_no) + "expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    const int year = parse_int(fields[0], path, line_no, "year");
    const int member = parse_int(fields[1], path, line_no, "member");
    if (member < 1) {
      throw ParseError(loc(path, line_no) + "member ids must be >= 1");
    }
    const double value = parse_double(fields[2], path, line_no, "value");
    if (!std::isfinite(value)) {
      throw ParseError(loc(path, line_no) + "non-finite value");
    }

    const auto [it, inserted] = cells.emplace(std::make_pair(year, member), Cell{value, line_no});
    if (!inserted) {
      throw ParseError(loc(path, line_no) + "duplicate (year, member) pair (" +
                       std::to_string(year) + ", " + std::to_string(member) +
                       "), first seen on line " + std::to_string(it->second.line));
    }
    member_ids.insert(member);

    if (has_covariate) {
      const double cov = parse_double(fields[3], path, line_no, "covariate");
      const auto [cit, cov_inserted] = year_covariate.emplace(year, std::make_pair(cov, line_no));
      if (!cov_inserted && cit->second.first != cov) {
        throw ParseError(loc(path, line_no) + "covariate for year " + std::to_string(year) +
                         " disagrees with line " + std::to_string(cit->second.second));
      }
    }
  }
  if (cells.empty()) {
    throw ParseError(path.string() + ": no data rows");
  }

  ScenarioSeries out;
  out.scenario = tag;
  std::set<int> year_set;
  for (const auto& [key, cell] : cells) year_set.insert(key.first);
  out.years.assign(year_set.begin(), year_set.end());
  out.members = static_cast<int>(member_ids.size());
  out.values.assign(out.years.size() * member_ids.size(), 0.0);

  std::map<int, int> member_row;
  int row = 0;
  for (int id : member_ids) member_row[id] = row++;

  for (std::size_t t = 0; t < out.years.size(); ++t) {
    for (int id : member_ids) {
      const auto it = cells.find({out.years[t], id});
      if (it == cells.end()) {
        throw ParseError(path.string() + ": missing value for year " +
                         std::to_string(out.years[t]) + ", member " + std::to_string(id));
      }
      out.value(member_row[id], t) = it->second.value;
    }
  }
  if (has_covariate) {
    std::vector<double> cov;
    cov.reserve(out.years.size());
    for (int y : out.years) cov.push_back(year_covariate.at(y).first);
    out.covariate = std::move(cov);
  }
  out.validate();
  return out;
}

void save_series(const ScenarioSeries& series, const std::filesystem::path& path) {
  series.validate();
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << (series.covariate ? "year,member,value,covariate\n" : "year,member,value\n");
  char buf[64];
  for (int m = 0; m < series.members; ++m) {
    for (std::size_t t = 0; t < series.year_count(); ++t) {
      out << series.years[t] << ',' << (m + 1) << ',';
      std::snprintf(buf, sizeof buf, "%.17g", series.value(m, t));
      out << buf;
      if (series.covariate) {
        std::snprintf(buf, sizeof buf, "%.17g", (*series.covariate)[t]);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

ScenarioSeries compute_anomalies(const ScenarioSeries& series, int ref_start, int ref_end) {
  series.validate();
  if (ref_start > ref_end) {
    throw InvalidInputError("reference window start exceeds end");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < series.year_count(); ++t) {
    if (series.years[t] < ref_start || series.years[t] > ref_end) continue;
    for (int m = 0; m < series.members; ++m) {
      sum += series.value(m, t);
      ++count;
    }
  }
  if (count == 0) {
    throw InvalidInputError("reference window contains no years of the series");
  }
  const double mean = sum / static_cast<double>(count);
  ScenarioSeries out = series;
  for (double& v : out.values) v -= mean;
  return out;
}

SmootherSpec SmootherSpec::binomial13() {
  SmootherSpec spec;
  spec.weights.resize(13);
  double c = 1.0;  // C(12, k), denominator 2^12 = 4096
  for (int k = 0; k <= 12; ++k) {
    spec.weights[static_cast<std::size_t>(k)] = c / 4096.0;
    c = c * (12 - k) / (k + 1);
  }
  return spec;
}

void SmootherSpec::validate() const {
  if (weights.empty() || weights.size() % 2 == 0) {
    throw InvalidInputError("smoother window must have odd length");
  }
  double sum = 0.0;
  const std::size_t n = weights.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!(weights[k] > 0.0)) {
      throw InvalidInputError("smoother weights must be positive");
    }
    if (std::abs(weights[k] - weights[n - 1 - k]) > 1e-15) {
      throw InvalidInputError("smoother weights must be symmetric");
    }
    sum += weights[k];
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvalidInputError("smoother weights must sum to 1");
  }
}

std::vector<double> smooth_covariate(std::span<const double> raw, const SmootherSpec& spec) {
  spec.validate();
  const std::size_t n = raw.size();
  const std::size_t w = spec.window();
  if (n < w) {
    throw InvalidInputError("series shorter than the smoother window");
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(w / 2);
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(n) - 1;

  std::vector<double> out(n);
  for (std::ptrdiff_t i = 0; i <= last; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      std::ptrdiff_t j = i + k;
      if (j < 0) j = -j;                       // reflect about the first sample
      if (j > last) j = 2 * last - j;          // reflect about the last sample
      acc += spec.weights[static_cast<std::size_t>(k + half)] * raw[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over seed advanced by the stream index
  std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double gev_inverse_cdf(double u, const evd::EVDParams& params, std::span<const double> x) {
  if (!(u > 0.0 && u < 1.0)) {
    throw InvalidInputError("uniform variate must lie in (0, 1)");
  }
  // G(z) = u  <=>  P(Z > z) = 1 - u
  return evd::gev_return_level(1.0 - u, params, x);
}

evd::EVDParams per_observation_params(const evd::EVDParams& block_scale, double n_per_year) {
  block_scale.validate();
  if (!(n_per_year >= 1.0)) {
    throw InvalidInputError("observations per year must be at least 1");
  }
  if (n_per_year == 1.0) {
    return block_scale;
  }
  evd::EVDParams obs = block_scale;
  const double xi = block_scale.xi;
  const double log_n = std::log(n_per_year);
  if (std::abs(xi) < evd::kGumbelTol) {
    obs.beta[0] = block_scale.beta[0] - block_scale.sigma * log_n;
  } else {
    const double shrink = std::exp(-xi * log_n);  // n^(-xi)
    obs.sigma = block_scale.sigma * shrink;
    obs.beta[0] = block_scale.beta[0] - block_scale.sigma * (1.0 - shrink) / xi;
  }
  return obs;
}

namespace {

ScenarioSeries draw_scenario(const ScenarioSpec& spec, Scenario tag,
                             std::span<const double> covariate, std::uint64_t seed) {
  spec.truth.validate();
  if (spec.members < 1 || spec.n_years < 1) {
    throw InvalidInputError("scenario needs at least one member and one year");
  }
  if (spec.use_covariate && covariate.size() != static_cast<std::size_t>(spec.n_years)) {
    throw InvalidInputError("covariate path must match the scenario's year count");
  }

  const evd::EVDParams obs_params =
      per_observation_params(spec.truth, static_cast<double>(spec.members));

  ScenarioSeries out;
  out.scenario = tag;
  out.members = spec.members;
  out.years.resize(static_cast<std::size_t>(spec.n_years));
  for (int t = 0; t < spec.n_years; ++t) out.years[static_cast<std::size_t>(t)] = spec.first_year + t;
  out.values.resize(static_cast<std::size_t>(spec.members) * static_cast<std::size_t>(spec.n_years));
  if (spec.use_covariate) {
    out.covariate = std::vector<double>(covariate.begin(), covariate.end());
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  for (int m = 0; m < spec.members; ++m) {
    for (int t = 0; t < spec.n_years; ++t) {
      std::span<const double> x;
      if (spec.use_covariate && !obs_params.is_stationary()) {
        x = covariate.subspan(static_cast<std::size_t>(t), 1);
      }
      out.value(m, static_cast<std::size_t>(t)) = gev_inverse_cdf(unif(rng), obs_params, x);
    }
  }
  return out;
}

}  // namespace

SyntheticStudy simulate_study(const StudySpec& spec) {
  if (!(spec.event_probability > 0.0 && spec.event_probability < 1.0)) {
    throw InvalidInputError("event probability must lie in (0, 1)");
  }

  SyntheticStudy study;
  study.observations = draw_scenario(spec.observations, Scenario::Observation, spec.covariate,
                                     mix_seed(spec.seed, 0));
  study.actual =
      draw_scenario(spec.actual, Scenario::Actual, spec.covariate, mix_seed(spec.seed, 1));
  study.counterfactual = draw_scenario(spec.counterfactual, Scenario::Counterfactual,
                                       spec.covariate, mix_seed(spec.seed, 2));

  std::vector<double> x_event;
  if (spec.actual.use_covariate && !spec.actual.truth.is_stationary()) {
    x_event.push_back(study.actual.covariate_at(spec.event_year));
  }
  std::vector<double> x_event_cf;
  if (spec.counterfactual.use_covariate && !spec.counterfactual.truth.is_stationary()) {
    x_event_cf.push_back(study.counterfactual.covariate_at(spec.event_year));
  }
  study.true_z_A = evd::gev_return_level(spec.event_probability, spec.actual.truth, x_event);
  study.true_p_C = evd::gev_exceedance_prob(study.true_z_A, spec.counterfactual.truth, x_event_cf);
  if (study.true_p_C > 0.0) {
    study.true_rr = spec.event_probability / study.true_p_C;
    study.true_log2_rr = std::log2(study.true_rr);
  } else {
    study.true_rr = std::numeric_limits<double>::infinity();
    study.true_log2_rr = std::numeric_limits<double>::infinity();
  }
  return study;
}

}  // namespace evattr
