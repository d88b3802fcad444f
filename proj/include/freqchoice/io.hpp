#pragma once

// JSON round trips for specs, parameter sets, fit results, and simulation
// configs, plus CSV emitters for effects and comparison reports. All JSON is
// built as nlohmann::ordered_json with a fixed field order, so serializing
// the same value twice yields byte-identical text.

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqchoice/compare.hpp"
#include "freqchoice/csv.hpp"
#include "freqchoice/effects.hpp"
#include "freqchoice/estimate.hpp"
#include "freqchoice/simulate.hpp"

namespace freqchoice {

using ojson = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const ojson& j, const char* what,
                                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || key == name;
    if (!ok) {
      throw SpecError(std::string(what) + " has unknown field '" + key + "'");
    }
  }
}

inline const ojson& require_field(const ojson& j, const char* what,
                                  const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw SpecError(std::string(what) + " is missing field '" + key + "'");
  }
  return *it;
}

inline double json_number(const ojson& j, const char* what) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) {
    throw SpecError(std::string(what) + " must be a number");
  }
  return j.get<double>();
}

inline std::vector<double> json_number_vector(const ojson& j,
                                              const char* what) {
  if (!j.is_array()) {
    throw SpecError(std::string(what) + " must be an array of numbers");
  }
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(json_number(e, what));
  return out;
}

inline ojson covariates_to_json(const std::vector<CovariateRef>& covs) {
  ojson arr = ojson::array();
  for (const auto& c : covs) {
    arr.push_back({{"column", c.column}, {"transform", transform_name(c.transform)}});
  }
  return arr;
}

inline std::vector<CovariateRef> covariates_from_json(const ojson& j,
                                                      const char* what) {
  if (!j.is_array()) {
    throw SpecError(std::string(what) + " must be an array");
  }
  std::vector<CovariateRef> out;
  for (const auto& e : j) {
    reject_unknown_keys(e, what, {"column", "transform"});
    CovariateRef ref;
    ref.column = require_field(e, what, "column").get<std::string>();
    if (e.contains("transform")) {
      ref.transform = transform_from_name(e["transform"].get<std::string>());
    }
    out.push_back(std::move(ref));
  }
  return out;
}

}  // namespace detail

inline ojson spec_to_json(const ModelSpec& spec) {
  ojson j;
  j["family"] = family_name(spec.family);
  j["top_code"] = spec.top_code;
  j["index_covariates"] = detail::covariates_to_json(spec.index_covariates);
  j["split_intercept"] = spec.split_intercept;
  j["split_covariates"] = detail::covariates_to_json(spec.split_covariates);
  ojson terms = ojson::array();
  for (const auto& t : spec.count_specific_terms) {
    terms.push_back({{"level", t.level},
                     {"column", t.column},
                     {"transform", transform_name(t.transform)}});
  }
  j["count_specific_terms"] = std::move(terms);
  j["rho_intercept"] = spec.rho_intercept;
  j["rho_covariates"] = detail::covariates_to_json(spec.rho_covariates);
  return j;
}

inline ModelSpec spec_from_json(const ojson& j) {
  detail::reject_unknown_keys(
      j, "model spec",
      {"family", "top_code", "index_covariates", "split_intercept",
       "split_covariates", "count_specific_terms", "rho_intercept",
       "rho_covariates"});
  ModelSpec spec;
  spec.family = family_from_name(
      detail::require_field(j, "model spec", "family").get<std::string>());
  const ojson& tc = detail::require_field(j, "model spec", "top_code");
  if (!tc.is_number_integer() || tc.get<long long>() < 0) {
    throw SpecError("top_code must be a non-negative integer");
  }
  spec.top_code = tc.get<int>();
  if (j.contains("index_covariates")) {
    spec.index_covariates =
        detail::covariates_from_json(j["index_covariates"], "index covariate");
  }
  if (j.contains("split_intercept")) {
    spec.split_intercept = j["split_intercept"].get<bool>();
  }
  if (j.contains("split_covariates")) {
    spec.split_covariates =
        detail::covariates_from_json(j["split_covariates"], "split covariate");
  }
  if (j.contains("count_specific_terms")) {
    for (const auto& e : j["count_specific_terms"]) {
      detail::reject_unknown_keys(e, "count-specific term",
                                  {"level", "column", "transform"});
      CountTerm term;
      term.level =
          detail::require_field(e, "count-specific term", "level").get<int>();
      term.column = detail::require_field(e, "count-specific term", "column")
                        .get<std::string>();
      if (e.contains("transform")) {
        term.transform =
            transform_from_name(e["transform"].get<std::string>());
      }
      spec.count_specific_terms.push_back(std::move(term));
    }
  }
  if (j.contains("rho_intercept")) {
    spec.rho_intercept = j["rho_intercept"].get<bool>();
  }
  if (j.contains("rho_covariates")) {
    spec.rho_covariates =
        detail::covariates_from_json(j["rho_covariates"], "rho covariate");
  }
  return validate_spec(spec);
}

inline ojson params_to_json(const ParamSet& p) {
  ojson j;
  j["beta"] = p.beta;
  j["thresholds"] = p.thresholds;
  j["log_sigma2"] = p.log_sigma2;
  j["gamma"] = p.gamma;
  j["log_r"] = p.log_r;
  j["omega"] = p.omega;
  j["theta"] = p.theta;
  return j;
}

inline ParamSet params_from_json(const ojson& j) {
  detail::reject_unknown_keys(j, "parameter set",
                              {"beta", "thresholds", "log_sigma2", "gamma",
                               "log_r", "omega", "theta"});
  ParamSet p;
  if (j.contains("beta")) p.beta = detail::json_number_vector(j["beta"], "beta");
  if (j.contains("thresholds")) {
    p.thresholds = detail::json_number_vector(j["thresholds"], "thresholds");
  }
  if (j.contains("log_sigma2")) {
    p.log_sigma2 = detail::json_number(j["log_sigma2"], "log_sigma2");
  }
  if (j.contains("gamma")) {
    p.gamma = detail::json_number_vector(j["gamma"], "gamma");
  }
  if (j.contains("log_r")) p.log_r = detail::json_number(j["log_r"], "log_r");
  if (j.contains("omega")) {
    p.omega = detail::json_number_vector(j["omega"], "omega");
  }
  if (j.contains("theta")) {
    p.theta = detail::json_number_vector(j["theta"], "theta");
  }
  return p;
}

inline ojson fit_to_json(const FitResult& fit) {
  ojson j;
  j["spec"] = spec_to_json(fit.spec);
  j["params"] = params_to_json(fit.params);
  j["labels"] = fit.labels;
  j["unconstrained"] = fit.unconstrained;
  j["ll"] = fit.ll_convergence;
  j["ll_null"] = fit.ll_null;
  j["k"] = fit.k;
  j["n"] = fit.n;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["gradient_norm"] = fit.gradient_norm;
  j["best_start"] = fit.best_start;
  j["used_fd_gradient"] = fit.used_fd_gradient;
  j["se_available"] = fit.se_available;
  j["se_note"] = fit.se_note;
  j["se"] = fit.se;
  j["t_stats"] = fit.t_stats;
  j["constrained"] = ojson{{"labels", fit.constrained_labels},
                           {"values", fit.constrained_values},
                           {"se", fit.constrained_se}};
  j["stats"] = ojson{{"aic", fit.stats.aic},
                     {"bic", fit.stats.bic},
                     {"rho_squared", fit.stats.rho_squared}};
  j["warnings"] = fit.warnings;
  return j;
}

inline FitResult fit_from_json(const ojson& j) {
  detail::reject_unknown_keys(
      j, "fit result",
      {"spec", "params", "labels", "unconstrained", "ll", "ll_null", "k", "n",
       "converged", "iterations", "gradient_norm", "best_start",
       "used_fd_gradient", "se_available", "se_note", "se", "t_stats",
       "constrained", "stats", "warnings"});
  FitResult fit;
  fit.spec = spec_from_json(detail::require_field(j, "fit result", "spec"));
  fit.params =
      params_from_json(detail::require_field(j, "fit result", "params"));
  if (j.contains("labels")) {
    fit.labels = j["labels"].get<std::vector<std::string>>();
  }
  if (j.contains("unconstrained")) {
    fit.unconstrained =
        detail::json_number_vector(j["unconstrained"], "unconstrained");
  }
  fit.ll_convergence =
      detail::json_number(detail::require_field(j, "fit result", "ll"), "ll");
  fit.ll_null = detail::json_number(
      detail::require_field(j, "fit result", "ll_null"), "ll_null");
  fit.k = detail::require_field(j, "fit result", "k").get<std::size_t>();
  fit.n = detail::require_field(j, "fit result", "n").get<std::size_t>();
  fit.converged =
      detail::require_field(j, "fit result", "converged").get<bool>();
  if (j.contains("iterations")) fit.iterations = j["iterations"].get<int>();
  if (j.contains("gradient_norm")) {
    fit.gradient_norm = detail::json_number(j["gradient_norm"], "gradient_norm");
  }
  if (j.contains("best_start")) fit.best_start = j["best_start"].get<int>();
  if (j.contains("used_fd_gradient")) {
    fit.used_fd_gradient = j["used_fd_gradient"].get<bool>();
  }
  if (j.contains("se_available")) {
    fit.se_available = j["se_available"].get<bool>();
  }
  if (j.contains("se_note")) fit.se_note = j["se_note"].get<std::string>();
  if (j.contains("se")) fit.se = detail::json_number_vector(j["se"], "se");
  if (j.contains("t_stats")) {
    fit.t_stats = detail::json_number_vector(j["t_stats"], "t_stats");
  }
  if (j.contains("constrained")) {
    const ojson& c = j["constrained"];
    detail::reject_unknown_keys(c, "constrained block",
                                {"labels", "values", "se"});
    if (c.contains("labels")) {
      fit.constrained_labels = c["labels"].get<std::vector<std::string>>();
    }
    if (c.contains("values")) {
      fit.constrained_values =
          detail::json_number_vector(c["values"], "constrained values");
    }
    if (c.contains("se")) {
      fit.constrained_se =
          detail::json_number_vector(c["se"], "constrained se");
    }
  }
  const ojson& stats = detail::require_field(j, "fit result", "stats");
  detail::reject_unknown_keys(stats, "fit statistics",
                              {"aic", "bic", "rho_squared"});
  fit.stats.aic = detail::json_number(
      detail::require_field(stats, "fit statistics", "aic"), "aic");
  fit.stats.bic = detail::json_number(
      detail::require_field(stats, "fit statistics", "bic"), "bic");
  fit.stats.rho_squared = detail::json_number(
      detail::require_field(stats, "fit statistics", "rho_squared"),
      "rho_squared");
  if (j.contains("warnings")) {
    fit.warnings = j["warnings"].get<std::vector<std::string>>();
  }
  return fit;
}

inline ojson simulation_config_to_json(const SimulationConfig& config) {
  ojson j;
  j["spec"] = spec_to_json(config.spec);
  j["true_params"] = params_to_json(config.true_params);
  j["n"] = config.n;
  j["seed"] = config.seed;
  ojson gens;
  for (const auto& [column, g] : config.covariate_generators) {
    switch (g.kind) {
      case CovariateGenerator::Kind::normal:
        gens[column] = {{"distribution", "normal"}, {"mean", g.a}, {"sd", g.b}};
        break;
      case CovariateGenerator::Kind::bernoulli:
        gens[column] = {{"distribution", "bernoulli"}, {"p", g.a}};
        break;
      case CovariateGenerator::Kind::lognormal:
        gens[column] = {{"distribution", "lognormal"},
                        {"mu", g.a},
                        {"sigma", g.b}};
        break;
      case CovariateGenerator::Kind::constant:
        gens[column] = {{"distribution", "constant"}, {"value", g.a}};
        break;
    }
  }
  j["covariate_generators"] = std::move(gens);
  return j;
}

inline SimulationConfig simulation_config_from_json(const ojson& j) {
  detail::reject_unknown_keys(
      j, "simulation config",
      {"spec", "true_params", "n", "seed", "covariate_generators"});
  SimulationConfig config;
  config.spec =
      spec_from_json(detail::require_field(j, "simulation config", "spec"));
  config.true_params = params_from_json(
      detail::require_field(j, "simulation config", "true_params"));
  const ojson& n = detail::require_field(j, "simulation config", "n");
  if (!n.is_number_integer() || n.get<long long>() < 0) {
    throw SpecError("simulation n must be a non-negative integer");
  }
  config.n = n.get<std::size_t>();
  if (j.contains("seed")) {
    const ojson& seed = j["seed"];
    if (!seed.is_number_integer() || seed.get<long long>() < 0) {
      throw SpecError("simulation seed must be a non-negative integer");
    }
    config.seed = seed.get<std::uint64_t>();
  }
  const ojson& gens =
      detail::require_field(j, "simulation config", "covariate_generators");
  if (!gens.is_object()) {
    throw SpecError("covariate_generators must be an object keyed by column");
  }
  for (const auto& [column, g] : gens.items()) {
    const std::string what = "generator for column '" + column + "'";
    const std::string dist =
        detail::require_field(g, what.c_str(), "distribution")
            .get<std::string>();
    CovariateGenerator gen;
    if (dist == "normal") {
      detail::reject_unknown_keys(g, what.c_str(),
                                  {"distribution", "mean", "sd"});
      gen.kind = CovariateGenerator::Kind::normal;
      gen.a = detail::json_number(
          detail::require_field(g, what.c_str(), "mean"), "mean");
      gen.b = detail::json_number(detail::require_field(g, what.c_str(), "sd"),
                                  "sd");
    } else if (dist == "bernoulli") {
      detail::reject_unknown_keys(g, what.c_str(), {"distribution", "p"});
      gen.kind = CovariateGenerator::Kind::bernoulli;
      gen.a = detail::json_number(detail::require_field(g, what.c_str(), "p"),
                                  "p");
    } else if (dist == "lognormal") {
      detail::reject_unknown_keys(g, what.c_str(),
                                  {"distribution", "mu", "sigma"});
      gen.kind = CovariateGenerator::Kind::lognormal;
      gen.a = detail::json_number(detail::require_field(g, what.c_str(), "mu"),
                                  "mu");
      gen.b = detail::json_number(
          detail::require_field(g, what.c_str(), "sigma"), "sigma");
    } else if (dist == "constant") {
      detail::reject_unknown_keys(g, what.c_str(), {"distribution", "value"});
      gen.kind = CovariateGenerator::Kind::constant;
      gen.a = detail::json_number(
          detail::require_field(g, what.c_str(), "value"), "value");
    } else {
      throw SpecError(what + " names unknown distribution '" + dist + "'");
    }
    config.covariate_generators.emplace_back(column, gen);
  }
  return config;
}

// One row per table: covariate, kind, scope, then d Pr(f = k)/dx columns.
inline void write_effects_csv(const std::vector<EffectsTable>& tables,
                              std::ostream& out) {
  if (tables.empty()) throw DataError("no effects tables to write");
  const std::size_t cats = tables.front().per_category.size();
  out << "covariate,kind,scope";
  for (std::size_t k = 0; k < cats; ++k) out << ",category_" << k;
  out << '\n';
  for (const auto& t : tables) {
    if (t.per_category.size() != cats) {
      throw DataError("effects tables disagree on the category count");
    }
    csv::write_field(out, t.covariate);
    out << ',' << effect_kind_name(t.kind) << ','
        << effect_scope_name(t.scope);
    for (const double e : t.per_category) out << ',' << csv::format_double(e);
    out << '\n';
  }
}

inline void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                                 std::ostream& out) {
  out << "label,family,n,k,ll,ll_null,aic,bic,rho_squared,best_aic,best_bic,"
         "best_rho,aic_tie\n";
  for (const auto& r : rows) {
    csv::write_field(out, r.label);
    out << ',' << family_name(r.family) << ',' << r.n << ',' << r.k << ','
        << csv::format_double(r.ll) << ',' << csv::format_double(r.ll_null)
        << ',' << csv::format_double(r.aic) << ',' << csv::format_double(r.bic)
        << ',' << csv::format_double(r.rho_squared) << ',' << int(r.best_aic)
        << ',' << int(r.best_bic) << ',' << int(r.best_rho) << ','
        << int(r.aic_tie) << '\n';
  }
}

}  // namespace freqchoice
