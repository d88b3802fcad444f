#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "freqchoice/numeric.hpp"
#include "freqchoice/types.hpp"

namespace freqchoice {

// Negative binomial mass at y, reparameterized as a systematic utility so
// that softmax over 0..C reproduces the right-truncated distribution:
//   V_y = log NB(y; r, lambda) + log-constant common to all y.
// Written so it stays accurate as r -> infinity (the Poisson limit):
//   lgamma(r+y) - lgamma(r) - lgamma(y+1) == sum_{j<y} log(r+j) - lgamma(y+1)
// and the r^r/(r+lambda)^(r+y) block is folded into log-space.
inline double nb_systematic_utility(int y, double lambda, double r) {
  if (y < 0) throw DimensionError("count level must be >= 0");
  if (!(std::isfinite(lambda) && lambda > 0.0)) {
    throw NumericError("lambda must be finite and > 0");
  }
  if (!(std::isfinite(r) && r > 0.0)) {
    throw NumericError("r must be finite and > 0");
  }
  const double log_r = std::log(r);
  const double v = std::log(lambda);
  const double log_rpl = numeric::log_sum_exp(log_r, v);
  double comb = 0.0;  // log Gamma(r+y) - log Gamma(r) - y log r
  for (int j = 1; j < y; ++j) comb += std::log1p(static_cast<double>(j) / r);
  return y * log_r + comb - std::lgamma(y + 1.0) + y * (v - log_rpl);
}

// Poisson counterpart: V_y = y log(lambda) - log(y!).
inline double poisson_systematic_utility(int y, double lambda) {
  if (y < 0) throw DimensionError("count level must be >= 0");
  if (!(std::isfinite(lambda) && lambda > 0.0)) {
    throw NumericError("lambda must be finite and > 0");
  }
  return y * std::log(lambda) - std::lgamma(y + 1.0);
}

namespace ogev {

// Ordered GEV allocation over alternatives 0..C with overlapping two-member
// nests r = 0..C+1 (nest r holds {r-1, r} intersected with the range).
// Everything is kept in log space:
//   a_y   = (V_y - max V) / rho
//   lnT_r = lse(a_{r-1}, a_r)
//   lnN_y = a_y + lse((rho-1) lnT_y, (rho-1) lnT_{y+1})
//   lnD   = lse_r(rho lnT_r)
//   P_y   = exp(lnN_y - lnD)
// At rho = 1 this is exactly softmax(V).
struct Eval {
  double rho = 1.0;
  std::vector<double> a;      // size C+1
  std::vector<double> ln_t;   // size C+2, nest aggregates
  std::vector<double> ln_n;   // size C+1
  double ln_d = 0.0;
  std::vector<double> prob;   // size C+1

  int top_code() const { return static_cast<int>(a.size()) - 1; }

  double log_prob(int y) const { return ln_n[y] - ln_d; }

  // d log P_f / d V_m for all m plus d log P_f / d rho, the per-observation
  // gradient row used by the likelihood.
  void dlog_row(int f, std::span<double> dv, double& drho) const;

  // dP_y for the utility perturbation dV_m = g_m (all y at once), used by
  // covariate effects where g is the per-alternative response to one input.
  std::vector<double> dprob_direction(std::span<const double> g) const;

  // dP_y / d rho for all y.
  std::vector<double> dprob_drho() const;

 private:
  // Mean of a over nest r, weighted by exp(a)/T_r; finite for every nest.
  double nest_mean_a(int r) const;
  // d log T_r / d rho = -mean_a(r)/rho, and d(T^rho)/drho pieces.
  double dlog_prob_drho(int y, double dd) const;
  double dlog_d_drho() const;
};

// Fills an existing Eval, reusing its buffers; the likelihood loop calls
// this once per observation so the allocation-free path matters.
inline void evaluate_into(Eval& e, std::span<const double> utilities,
                          double rho) {
  // Below ~1e-5 the scaled utilities (V - max V)/rho grow so large that
  // ln N = a_y + (rho-1) lnT cancels two huge magnitudes and the result is
  // dominated by rounding noise; the exact log-probabilities out there are
  // astronomically negative anyway, so refuse rather than return garbage.
  if (!(std::isfinite(rho) && rho >= 1e-5 && rho <= 1.0)) {
    throw NumericError("rho must lie in [1e-5, 1]");
  }
  const std::size_t n = utilities.size();
  if (n < 2) throw DimensionError("need at least two alternatives");
  e.rho = rho;
  e.a.resize(n);
  const double vmax = *std::max_element(utilities.begin(), utilities.end());
  numeric::require_finite(vmax, "utility");
  for (std::size_t y = 0; y < n; ++y) {
    numeric::require_finite(utilities[y], "utility");
    e.a[y] = (utilities[y] - vmax) / rho;
  }
  e.ln_t.resize(n + 1);
  e.ln_t[0] = e.a[0];
  e.ln_t[n] = e.a[n - 1];
  for (std::size_t r = 1; r < n; ++r) {
    e.ln_t[r] = numeric::log_sum_exp(e.a[r - 1], e.a[r]);
  }
  e.ln_n.resize(n);
  double mx = numeric::neg_inf;
  for (std::size_t r = 0; r <= n; ++r) mx = std::max(mx, rho * e.ln_t[r]);
  double sum = 0.0;
  for (std::size_t r = 0; r <= n; ++r) sum += std::exp(rho * e.ln_t[r] - mx);
  e.ln_d = mx + std::log(sum);
  e.prob.resize(n);
  for (std::size_t y = 0; y < n; ++y) {
    e.ln_n[y] = e.a[y] + numeric::log_sum_exp((rho - 1.0) * e.ln_t[y],
                                              (rho - 1.0) * e.ln_t[y + 1]);
    e.prob[y] = std::exp(e.ln_n[y] - e.ln_d);
  }
}

inline Eval evaluate(std::span<const double> utilities, double rho) {
  Eval e;
  evaluate_into(e, utilities, rho);
  return e;
}

inline double Eval::nest_mean_a(int r) const {
  const int C = top_code();
  double num = 0.0;
  if (r - 1 >= 0 && r - 1 <= C) num += std::exp(a[r - 1] - ln_t[r]) * a[r - 1];
  if (r >= 0 && r <= C) num += std::exp(a[r] - ln_t[r]) * a[r];
  return num;
}

inline void Eval::dlog_row(int f, std::span<double> dv, double& drho) const {
  const int C = top_code();
  for (int m = 0; m <= C; ++m) dv[m] = -prob[m];
  dv[f] += 1.0 / rho;
  // Cross terms through the two nests containing f. Each contribution is
  //   (rho-1)/rho * exp(a_m - lnT_r) * exp(a_f + (rho-1) lnT_r - lnN_f),
  // a product of two factors in [0, 1].
  if (rho != 1.0) {
    const double c = (rho - 1.0) / rho;
    for (int r = f; r <= f + 1; ++r) {
      const double w = std::exp(a[f] + (rho - 1.0) * ln_t[r] - ln_n[f]);
      for (int m = r - 1; m <= r; ++m) {
        if (m < 0 || m > C) continue;
        dv[m] += c * std::exp(a[m] - ln_t[r]) * w;
      }
    }
  }
  drho = dlog_prob_drho(f, dlog_d_drho());
}

inline double Eval::dlog_d_drho() const {
  const int C = top_code();
  double dd = 0.0;
  for (int r = 0; r <= C + 1; ++r) {
    dd += std::exp(rho * ln_t[r] - ln_d) * (ln_t[r] - nest_mean_a(r));
  }
  return dd;
}

inline double Eval::dlog_prob_drho(int y, double dd) const {
  // lnN_y = a_y + lse((rho-1) lnT_y, (rho-1) lnT_{y+1}); both branches move
  // with rho through the exponent and through lnT itself:
  //   d[(rho-1) lnT_r]/drho = lnT_r - (rho-1)/rho * mean_a(r).
  const double la = (rho - 1.0) * ln_t[y];
  const double lb = (rho - 1.0) * ln_t[y + 1];
  const double lab = numeric::log_sum_exp(la, lb);
  const double wa = std::exp(la - lab);
  const double wb = std::exp(lb - lab);
  const double ga = ln_t[y] - (rho - 1.0) / rho * nest_mean_a(y);
  const double gb = ln_t[y + 1] - (rho - 1.0) / rho * nest_mean_a(y + 1);
  return -a[y] / rho + wa * ga + wb * gb - dd;
}

inline std::vector<double> Eval::dprob_direction(
    std::span<const double> g) const {
  const int C = top_code();
  double pg = 0.0;
  for (int m = 0; m <= C; ++m) pg += prob[m] * g[m];
  // Per-nest exp(a)-weighted mean of g, the analogue of nest_mean_a.
  std::vector<double> gbar(C + 2, 0.0);
  for (int r = 0; r <= C + 1; ++r) {
    double num = 0.0;
    if (r - 1 >= 0) num += std::exp(a[r - 1] - ln_t[r]) * g[r - 1];
    if (r <= C) num += std::exp(a[r] - ln_t[r]) * g[r];
    gbar[r] = num;
  }
  std::vector<double> out(C + 1);
  const double c = (rho - 1.0) / rho;
  for (int y = 0; y <= C; ++y) {
    double d = prob[y] * (g[y] / rho - pg);
    if (rho != 1.0) {
      d += c * std::exp(a[y] + (rho - 1.0) * ln_t[y] - ln_d) * gbar[y];
      d += c * std::exp(a[y] + (rho - 1.0) * ln_t[y + 1] - ln_d) * gbar[y + 1];
    }
    out[y] = d;
  }
  return out;
}

inline std::vector<double> Eval::dprob_drho() const {
  const int C = top_code();
  const double dd = dlog_d_drho();
  std::vector<double> out(C + 1);
  for (int y = 0; y <= C; ++y) out[y] = prob[y] * dlog_prob_drho(y, dd);
  return out;
}

}  // namespace ogev

// Allocation probabilities over 0..C for given systematic utilities.
inline std::vector<double> ogev_pmf(std::span<const double> utilities,
                                    double rho) {
  return ogev::evaluate(utilities, rho).prob;
}

struct CountUtilityInput {
  double lambda = 1.0;
  double r = 1.0;                // ignored by the Poisson family
  std::vector<double> eta;       // per-level utility shifts, exactly C+1
  double rho = 1.0;
};

// Full count-family pmf over 0..C: mean-model utilities plus level shifts
// fed through the OGEV allocator.
inline std::vector<double> count_choice_pmf(const CountUtilityInput& input,
                                            Family family, int top_code) {
  if (!is_count_family(family)) {
    throw SpecError("count_choice_pmf requires a count family");
  }
  if (static_cast<int>(input.eta.size()) != top_code + 1) {
    throw DimensionError("eta must have one entry per count level 0..C");
  }
  std::vector<double> util(static_cast<std::size_t>(top_code) + 1);
  for (int y = 0; y <= top_code; ++y) {
    util[y] = family == Family::nb_ogev
                  ? nb_systematic_utility(y, input.lambda, input.r)
                  : poisson_systematic_utility(y, input.lambda);
    util[y] += input.eta[y];
  }
  return ogev_pmf(util, input.rho);
}

}  // namespace freqchoice
