#pragma once

// Marginal effects of covariates on category probabilities: exact analytic
// derivatives of each family's pmf at one observation, sample averages over
// a dataset, and unit discrete-change contrasts for dummy regressors.
//
// Effects are taken with respect to the covariate as the kernels see it,
// i.e. after any ingestion transform, so they are the exact derivatives of
// category_pmf with respect to the stored column value.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "freqchoice/estimate.hpp"

namespace freqchoice {

enum class EffectScope { at_observation, sample_average };
enum class EffectKind { derivative, discrete_change };

inline const char* effect_scope_name(EffectScope s) {
  return s == EffectScope::at_observation ? "at_observation" : "sample_average";
}

inline const char* effect_kind_name(EffectKind k) {
  return k == EffectKind::derivative ? "derivative" : "discrete_change";
}

struct EffectsTable {
  std::string covariate;
  // d Pr(f = k)/dx (or the Pr(x=1) - Pr(x=0) contrast) for k = 0..top_code.
  std::vector<double> per_category;
  EffectScope scope = EffectScope::at_observation;
  EffectKind kind = EffectKind::derivative;
};

namespace detail {

// Sum of the coefficients attached to `covariate` in one covariate list
// (a column may enter a list more than once). The optional intercept slot
// occupies coef[0] and never matches a covariate.
inline double matched_coefficient_sum(const std::vector<CovariateRef>& covs,
                                      const std::vector<double>& coef,
                                      bool intercept,
                                      const std::string& covariate,
                                      bool& found) {
  double out = 0.0;
  std::size_t j = intercept ? 1 : 0;
  for (const auto& c : covs) {
    if (c.column == covariate) {
      out += coef[j];
      found = true;
    }
    ++j;
  }
  return out;
}

inline void reject_const_covariate(const std::string& covariate) {
  if (covariate == kConstColumn) {
    throw DataError("'" + std::string(kConstColumn) +
                    "' is the constant regressor, not a covariate");
  }
}

[[noreturn]] inline void covariate_not_in_model(const std::string& covariate) {
  throw DataError("covariate '" + covariate +
                  "' does not enter the model specification");
}

// d p_k/dv for an ordered survival chain, k = 0..C. dS(k)/dv = S(k) alpha
// sig_k telescopes through p_k = S(k) - S(k+1) with S(0) and S(C+1) constant.
inline std::vector<double> ordered_dpmf_dv(const ordered::SurvivalTerms& terms,
                                           double alpha) {
  const std::size_t C = terms.log_surv.size();
  std::vector<double> ds(C);
  for (std::size_t k = 0; k < C; ++k) {
    ds[k] = std::exp(terms.log_surv[k]) * alpha * terms.sig[k];
  }
  std::vector<double> d(C + 1);
  for (std::size_t k = 0; k <= C; ++k) {
    const double hi = k >= 1 ? ds[k - 1] : 0.0;
    const double lo = k < C ? ds[k] : 0.0;
    d[k] = hi - lo;
  }
  return d;
}

}  // namespace detail

// Pure index channel: d p_k/dx = (dS_k - dS_{k+1}) * dv/dx with
// dS_k/dv = alpha S(k) logistic(delta_k - v - ln alpha).
inline EffectsTable ordered_marginal_effects(const ModelSpec& spec,
                                             const ParamSet& params,
                                             const Observation& obs,
                                             const std::string& covariate) {
  if (spec.family != Family::oev_gamma) {
    throw SpecError("ordered_marginal_effects requires the oev_gamma family");
  }
  check_params(params, ParamLayout::for_spec(spec));
  detail::reject_const_covariate(covariate);
  bool found = false;
  const double dvdx = detail::matched_coefficient_sum(
      spec.index_covariates, params.beta, false, covariate, found);
  if (!found) detail::covariate_not_in_model(covariate);

  const double v = linear_index(obs, spec.index_covariates, params.beta, false);
  const double alpha = std::exp(params.log_sigma2);
  const auto terms = ordered::survival_terms(params.thresholds, v, alpha);
  EffectsTable out;
  out.covariate = covariate;
  out.per_category = detail::ordered_dpmf_dv(terms, alpha);
  for (auto& e : out.per_category) e *= dvdx;
  return out;
}

// Hurdle probability F = logistic(s) responds through the split index z;
// the positive categories carry both the reallocated hurdle mass and the
// latent ordered derivative:
//   d p_0 = F(1-F) dz,   d p_f = -F(1-F) dz lat_{f-1} + (1-F) dlat_{f-1}.
inline EffectsTable split_marginal_effects(const ModelSpec& spec,
                                           const ParamSet& params,
                                           const Observation& obs,
                                           const std::string& covariate) {
  if (spec.family != Family::split_oev_gamma) {
    throw SpecError(
        "split_marginal_effects requires the split_oev_gamma family");
  }
  check_params(params, ParamLayout::for_spec(spec));
  detail::reject_const_covariate(covariate);
  bool found = false;
  const double dzdx = detail::matched_coefficient_sum(
      spec.split_covariates, params.gamma, spec.split_intercept, covariate,
      found);
  const double dvdx = detail::matched_coefficient_sum(
      spec.index_covariates, params.beta, false, covariate, found);
  if (!found) detail::covariate_not_in_model(covariate);

  const double s =
      linear_index(obs, spec.split_covariates, params.gamma,
                   spec.split_intercept);
  const double F = numeric::logistic(s);
  const double dF = F * (1.0 - F) * dzdx;
  const int C = spec.top_code;
  EffectsTable out;
  out.covariate = covariate;
  out.per_category.assign(static_cast<std::size_t>(C) + 1, 0.0);
  out.per_category[0] = dF;
  if (C == 1) {
    out.per_category[1] = -dF;
    return out;
  }
  const double v = linear_index(obs, spec.index_covariates, params.beta, false);
  const double alpha = std::exp(params.log_sigma2);
  const auto terms = ordered::survival_terms(params.thresholds, v, alpha);
  const auto latent = ordered::pmf_from_log_survival(terms.log_surv);
  const auto dlat = detail::ordered_dpmf_dv(terms, alpha);
  for (int k = 1; k <= C; ++k) {
    out.per_category[k] =
        -dF * latent[k - 1] + (1.0 - F) * dlat[k - 1] * dvdx;
  }
  return out;
}

// Count families: the covariate can shift the mean-frequency index (scaled
// by y, damped by r/(r+lambda) under NB overdispersion), a count-specific
// utility term, and the nest correlation rho = logistic(theta'w).
inline EffectsTable ogev_marginal_effects(const ModelSpec& spec,
                                          const ParamSet& params,
                                          const Observation& obs,
                                          const std::string& covariate) {
  if (!is_count_family(spec.family)) {
    throw SpecError("ogev_marginal_effects requires a count family");
  }
  check_params(params, ParamLayout::for_spec(spec));
  detail::reject_const_covariate(covariate);
  const bool nb = spec.family == Family::nb_ogev;
  bool found = false;
  const double dvdx = detail::matched_coefficient_sum(
      spec.index_covariates, params.beta, false, covariate, found);
  const double dthetadx = detail::matched_coefficient_sum(
      spec.rho_covariates, params.theta, spec.rho_intercept, covariate, found);

  const int C = spec.top_code;
  const double v = linear_index(obs, spec.index_covariates, params.beta, false);
  const double lambda = std::exp(v);
  const double r = std::exp(params.log_r);
  std::vector<double> util(static_cast<std::size_t>(C) + 1);
  std::vector<double> dudx(static_cast<std::size_t>(C) + 1);
  // dV_y/dv = y r/(r+lambda) for NB, y for Poisson.
  const double mean_scale = nb ? numeric::logistic(params.log_r - v) : 1.0;
  for (int y = 0; y <= C; ++y) {
    util[y] = nb ? nb_systematic_utility(y, lambda, r)
                 : poisson_systematic_utility(y, lambda);
    dudx[y] = y * mean_scale * dvdx;
  }
  for (std::size_t t = 0; t < spec.count_specific_terms.size(); ++t) {
    const auto& term = spec.count_specific_terms[t];
    util[term.level] += params.omega[t] * observation_value(obs, term.column);
    if (term.column == covariate) {
      dudx[term.level] += params.omega[t];
      found = true;
    }
  }
  if (!found) detail::covariate_not_in_model(covariate);

  const bool rho_modeled = spec.rho_intercept || !spec.rho_covariates.empty();
  double rho = 1.0;
  if (rho_modeled) {
    rho = numeric::logistic(linear_index(obs, spec.rho_covariates,
                                         params.theta, spec.rho_intercept));
  }
  const ogev::Eval eval = ogev::evaluate(util, rho);
  EffectsTable out;
  out.covariate = covariate;
  out.per_category = eval.dprob_direction(dudx);
  if (rho_modeled && dthetadx != 0.0) {
    const double drdx = rho * (1.0 - rho) * dthetadx;
    const auto dpr = eval.dprob_drho();
    for (int y = 0; y <= C; ++y) out.per_category[y] += dpr[y] * drdx;
  }
  return out;
}

inline EffectsTable marginal_effects(const ModelSpec& spec,
                                     const ParamSet& params,
                                     const Observation& obs,
                                     const std::string& covariate) {
  switch (spec.family) {
    case Family::oev_gamma:
      return ordered_marginal_effects(spec, params, obs, covariate);
    case Family::split_oev_gamma:
      return split_marginal_effects(spec, params, obs, covariate);
    default:
      return ogev_marginal_effects(spec, params, obs, covariate);
  }
}

// Unit contrast for dummy regressors: Pr(. | x = 1) - Pr(. | x = 0) with all
// other covariates held at their observed values. The contrast is formed on
// the stored (post-transform) scale, like everything else in this header.
inline EffectsTable discrete_change_effects(const ModelSpec& spec,
                                            const ParamSet& params,
                                            const Observation& obs,
                                            const std::string& covariate) {
  detail::reject_const_covariate(covariate);
  bool found = false;
  for (const auto& c : spec.index_covariates) found |= c.column == covariate;
  for (const auto& c : spec.split_covariates) found |= c.column == covariate;
  for (const auto& c : spec.rho_covariates) found |= c.column == covariate;
  for (const auto& t : spec.count_specific_terms)
    found |= t.column == covariate;
  if (!found) detail::covariate_not_in_model(covariate);

  Observation at = obs;
  at.covariates[covariate] = 1.0;
  const std::vector<double> hi = category_pmf(spec, params, at);
  at.covariates[covariate] = 0.0;
  const std::vector<double> lo = category_pmf(spec, params, at);
  EffectsTable out;
  out.covariate = covariate;
  out.kind = EffectKind::discrete_change;
  out.per_category.resize(hi.size());
  for (std::size_t k = 0; k < hi.size(); ++k) {
    out.per_category[k] = hi[k] - lo[k];
  }
  return out;
}

namespace detail {

template <typename PerObs>
inline EffectsTable averaged_table(const FitResult& fit, const Dataset& data,
                                   PerObs&& per_obs) {
  if (!fit.converged) {
    throw StateError("sample-average effects require a converged fit");
  }
  if (data.n() == 0) {
    throw DataError("cannot average effects over an empty dataset");
  }
  EffectsTable acc = per_obs(data.observation(0));
  for (std::size_t i = 1; i < data.n(); ++i) {
    const EffectsTable t = per_obs(data.observation(i));
    for (std::size_t k = 0; k < acc.per_category.size(); ++k) {
      acc.per_category[k] += t.per_category[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(data.n());
  for (auto& e : acc.per_category) e *= inv;
  acc.scope = EffectScope::sample_average;
  return acc;
}

}  // namespace detail

// Arithmetic mean of the per-observation effects over the dataset, evaluated
// at the fitted parameters. Accumulation runs in row order, so the result is
// reproducible bit for bit.
inline EffectsTable average_marginal_effects(const FitResult& fit,
                                             const Dataset& data,
                                             const std::string& covariate) {
  return detail::averaged_table(fit, data, [&](const Observation& obs) {
    return marginal_effects(fit.spec, fit.params, obs, covariate);
  });
}

inline EffectsTable average_discrete_change(const FitResult& fit,
                                            const Dataset& data,
                                            const std::string& covariate) {
  return detail::averaged_table(fit, data, [&](const Observation& obs) {
    return discrete_change_effects(fit.spec, fit.params, obs, covariate);
  });
}

}  // namespace freqchoice
