#pragma once

// Synthetic dataset generator for the model families. Covariates and
// frequencies are drawn through the counter-based generator in philox.hpp,
// keyed by (seed, purpose stream, row index): stream 0 feeds the frequency
// draw and stream j+1 feeds covariate column j, so every value is a pure
// function of the config and rows could be filled in any order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "freqchoice/data.hpp"
#include "freqchoice/model.hpp"
#include "freqchoice/philox.hpp"

namespace freqchoice {

struct CovariateGenerator {
  enum class Kind { normal, bernoulli, lognormal, constant };
  Kind kind = Kind::normal;
  // normal: a = mean, b = sd.  bernoulli: a = p.
  // lognormal: a = mu, b = sigma (log scale).  constant: a = value.
  double a = 0.0;
  double b = 1.0;
};

struct SimulationConfig {
  ModelSpec spec;
  ParamSet true_params;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  // Declaration order fixes the output column order.
  std::vector<std::pair<std::string, CovariateGenerator>> covariate_generators;
};

namespace detail {

inline void check_generator(const std::string& column,
                            const CovariateGenerator& g) {
  if (!std::isfinite(g.a) || !std::isfinite(g.b)) {
    throw SpecError("generator for column '" + column +
                    "' has non-finite parameters");
  }
  switch (g.kind) {
    case CovariateGenerator::Kind::normal:
      if (!(g.b > 0.0)) {
        throw SpecError("normal generator for column '" + column +
                        "' requires sd > 0");
      }
      break;
    case CovariateGenerator::Kind::bernoulli:
      if (!(g.a >= 0.0 && g.a <= 1.0)) {
        throw SpecError("bernoulli generator for column '" + column +
                        "' requires p in [0, 1]");
      }
      break;
    case CovariateGenerator::Kind::lognormal:
      if (!(g.b > 0.0)) {
        throw SpecError("lognormal generator for column '" + column +
                        "' requires sigma > 0");
      }
      break;
    case CovariateGenerator::Kind::constant:
      break;
  }
}

inline double draw_covariate(const CovariateGenerator& g, std::uint64_t seed,
                             std::uint64_t stream, std::uint64_t row) {
  switch (g.kind) {
    case CovariateGenerator::Kind::normal:
      return g.a + g.b * philox::normal(seed, stream, row);
    case CovariateGenerator::Kind::bernoulli:
      return philox::uniform(seed, stream, row) < g.a ? 1.0 : 0.0;
    case CovariateGenerator::Kind::lognormal:
      return std::exp(g.a + g.b * philox::normal(seed, stream, row));
    case CovariateGenerator::Kind::constant:
      return g.a;
  }
  throw SpecError("unknown covariate generator kind");
}

}  // namespace detail

// Draws covariates on the raw (pre-transform) scale, evaluates the family
// pmf on the model scale, and samples the frequency by inverse CDF. The
// returned Dataset holds raw values, exactly what a CSV on disk would hold.
inline Dataset simulate(const SimulationConfig& config) {
  const ModelSpec spec = validate_spec(config.spec);
  check_params(config.true_params, ParamLayout::for_spec(spec));
  for (const auto& [column, gen] : config.covariate_generators) {
    if (column.empty() || column == "freq" || column == kConstColumn) {
      throw SpecError("covariate generators cannot target column '" + column +
                      "'");
    }
    detail::check_generator(column, gen);
  }
  // Every column the model reads must have a generator; extra generated
  // columns are allowed and simply ride along in the dataset.
  const auto transforms = detail::transform_map(spec);
  for (const auto& [column, t] : transforms) {
    bool found = false;
    for (const auto& [name, gen] : config.covariate_generators) {
      found = found || name == column;
    }
    if (!found) {
      throw SpecError("no covariate generator for model column '" + column +
                      "'");
    }
  }

  const std::size_t cols = config.covariate_generators.size();
  std::vector<std::string> names(cols);
  std::vector<bool> log_scale(cols, false);
  std::vector<std::vector<double>> raw(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    names[j] = config.covariate_generators[j].first;
    raw[j].resize(config.n);
    const auto it = transforms.find(names[j]);
    log_scale[j] = it != transforms.end() && it->second == Transform::natural_log;
  }
  std::vector<int> freq(config.n);

  Observation obs;
  for (std::size_t i = 0; i < config.n; ++i) {
    obs.covariates.clear();
    for (std::size_t j = 0; j < cols; ++j) {
      const double value = detail::draw_covariate(
          config.covariate_generators[j].second, config.seed, j + 1, i);
      raw[j][i] = value;
      if (log_scale[j]) {
        if (!(value > 0.0)) {
          throw DataError("natural_log of non-positive simulated value in "
                          "column '" + names[j] + "'");
        }
        obs.covariates[names[j]] = std::log(value);
      } else {
        obs.covariates[names[j]] = value;
      }
    }
    const std::vector<double> pmf = category_pmf(spec, config.true_params, obs);
    const double u = philox::uniform(config.seed, 0, i);
    double acc = 0.0;
    int f = spec.top_code;
    for (int k = 0; k <= spec.top_code; ++k) {
      acc += pmf[k];
      if (u < acc) {
        f = k;
        break;
      }
    }
    freq[i] = f;
  }
  return Dataset(std::move(names), std::move(freq), std::move(raw));
}

}  // namespace freqchoice
