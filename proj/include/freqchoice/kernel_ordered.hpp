#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "freqchoice/numeric.hpp"

namespace freqchoice {

using numeric::logistic;

// Inputs to the Gamma-heterogeneous ordered extreme value kernel. The linear
// index v = beta'x; alpha is the Gamma heterogeneity parameter (> 0);
// thresholds are the strictly increasing cut points delta_k with
// Delta_k = exp(delta_k).
struct OrderedKernelInput {
  double v = 0.0;
  double alpha = 1.0;
  std::vector<double> thresholds;

  void check() const {
    numeric::require_finite(v, "v");
    if (!std::isfinite(alpha) || alpha <= 0.0) {
      throw NumericError("alpha must be finite and > 0");
    }
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      numeric::require_finite(thresholds[i], "threshold");
      if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
        throw NumericError("thresholds must be strictly increasing");
      }
    }
  }
};

namespace ordered {

// log S(k) = -alpha * log1p(exp(delta_k - v - log alpha)).
// S(k) = Pr(f > k-1) is the survival above the (k-1)/k boundary.
inline double log_survival(double delta, double v, double alpha) {
  const double t = delta - v - std::log(alpha);
  return -alpha * numeric::softplus(t);
}

// Per-threshold pieces shared by the pmf and its derivatives:
//   log_surv  log S(k)
//   sig       logistic(t_k), so  d log S_k / dv        =  alpha * sig
//                                d log S_k / d delta_k = -alpha * sig
//   dlog_da   d log S_k / d log(alpha) = -alpha*(softplus(t_k) - sig)
struct SurvivalTerms {
  std::vector<double> log_surv;
  std::vector<double> sig;
  std::vector<double> dlog_da;
};

inline SurvivalTerms survival_terms(std::span<const double> thresholds,
                                    double v, double alpha) {
  SurvivalTerms out;
  const std::size_t C = thresholds.size();
  out.log_surv.resize(C);
  out.sig.resize(C);
  out.dlog_da.resize(C);
  const double log_alpha = std::log(alpha);
  for (std::size_t i = 0; i < C; ++i) {
    const double t = thresholds[i] - v - log_alpha;
    const double sp = numeric::softplus(t);
    out.log_surv[i] = -alpha * sp;
    out.sig[i] = logistic(t);
    out.dlog_da[i] = -alpha * (sp - out.sig[i]);
  }
  return out;
}

// Category probabilities from log-survivals, with S(0) = 1 and S(C+1) = 0:
// p_k = S(k) - S(k+1). Differences are formed with expm1 so no category
// suffers cancellation.
inline std::vector<double> pmf_from_log_survival(
    std::span<const double> log_surv) {
  const std::size_t C = log_surv.size();
  std::vector<double> p(C + 1);
  p[0] = -std::expm1(log_surv[0]);
  for (std::size_t k = 1; k < C; ++k) {
    p[k] = log_surv[k] == numeric::neg_inf
               ? std::exp(log_surv[k - 1])
               : std::exp(log_surv[k]) *
                     std::expm1(log_surv[k - 1] - log_surv[k]);
  }
  p[C] = std::exp(log_surv[C - 1]);
  return p;
}

// log p_k, exact in the tails where p_k itself would underflow.
inline double log_pmf_at(std::span<const double> log_surv, int k) {
  const int C = static_cast<int>(log_surv.size());
  if (k == 0) return numeric::log1mexp(log_surv[0]);
  if (k == C) return log_surv[C - 1];
  const double hi = log_surv[k - 1];
  const double lo = log_surv[k];
  if (lo == numeric::neg_inf) return hi;
  return hi + numeric::log1mexp(lo - hi);
}

}  // namespace ordered

// S(k) = Pr(f > k-1) = (1 + Delta_k e^{-v} / alpha)^{-alpha}, k in 1..C.
inline double gamma_oev_survival(int k, const OrderedKernelInput& input) {
  input.check();
  if (k < 1 || k > static_cast<int>(input.thresholds.size())) {
    throw DimensionError("survival index k outside 1..C");
  }
  return std::exp(
      ordered::log_survival(input.thresholds[k - 1], input.v, input.alpha));
}

// Probability vector over categories 0..C; requires exactly C thresholds.
inline std::vector<double> gamma_oev_pmf(const OrderedKernelInput& input,
                                         int top_code) {
  input.check();
  if (static_cast<int>(input.thresholds.size()) != top_code) {
    throw DimensionError("expected " + std::to_string(top_code) +
                         " thresholds, got " +
                         std::to_string(input.thresholds.size()));
  }
  const auto terms =
      ordered::survival_terms(input.thresholds, input.v, input.alpha);
  return ordered::pmf_from_log_survival(terms.log_surv);
}

// Zero-hurdle variant: Pr(0) = logistic(s) exactly; the latent Gamma-OEV
// shares out the remaining mass over 1..C using the C-1 cuts delta_2..delta_C.
inline std::vector<double> split_oev_pmf(double s,
                                         const OrderedKernelInput& input,
                                         int top_code) {
  numeric::require_finite(s, "s");
  input.check();
  if (static_cast<int>(input.thresholds.size()) != top_code - 1) {
    throw DimensionError("split family expects " +
                         std::to_string(top_code - 1) + " thresholds, got " +
                         std::to_string(input.thresholds.size()));
  }
  const double F = logistic(s);
  std::vector<double> p(static_cast<std::size_t>(top_code) + 1);
  p[0] = F;
  if (top_code == 1) {
    p[1] = 1.0 - F;
    return p;
  }
  const auto terms =
      ordered::survival_terms(input.thresholds, input.v, input.alpha);
  const auto latent = ordered::pmf_from_log_survival(terms.log_surv);
  for (int k = 1; k <= top_code; ++k) {
    p[k] = (1.0 - F) * latent[k - 1];
  }
  return p;
}

// Baseline increments Delta_k - Delta_{k-1} with Delta_0 = 0; the cumulative
// sum reconstructs Delta_k = exp(delta_k).
inline std::vector<double> baseline_increments(
    std::span<const double> thresholds) {
  std::vector<double> inc(thresholds.size());
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    inc[k] = k == 0 ? std::exp(thresholds[0])
                    : std::exp(thresholds[k - 1]) *
                          std::expm1(thresholds[k] - thresholds[k - 1]);
  }
  return inc;
}

}  // namespace freqchoice
