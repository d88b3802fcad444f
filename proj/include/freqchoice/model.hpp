#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "freqchoice/data.hpp"
#include "freqchoice/kernel_count.hpp"
#include "freqchoice/kernel_ordered.hpp"
#include "freqchoice/numeric.hpp"
#include "freqchoice/types.hpp"

namespace freqchoice {

// Shape of the unconstrained parameter vector. Block order:
//   beta | threshold chain | log_sigma2 | gamma | log_r | omega | theta
// Thresholds are stored as delta_1 plus log-increments so monotonicity is
// structural; sigma2 and r enter through their logs. Null-model variants fix
// sigma2 at 1 (it is not identified when thresholds are saturated), which
// drops the log_sigma2 slot.
struct ParamLayout {
  Family family = Family::oev_gamma;
  int top_code = 6;
  std::size_t n_beta = 0;
  std::size_t n_thresholds = 0;
  bool sigma2_free = false;
  std::size_t n_gamma = 0;
  bool r_free = false;
  std::size_t n_omega = 0;
  std::size_t n_theta = 0;

  static ParamLayout for_spec(const ModelSpec& spec, bool fix_sigma2 = false) {
    ParamLayout l;
    l.family = spec.family;
    l.top_code = spec.top_code;
    l.n_beta = spec.index_covariates.size();
    switch (spec.family) {
      case Family::oev_gamma:
        l.n_thresholds = static_cast<std::size_t>(spec.top_code);
        l.sigma2_free = !fix_sigma2;
        break;
      case Family::split_oev_gamma:
        l.n_thresholds = static_cast<std::size_t>(spec.top_code - 1);
        l.sigma2_free = !fix_sigma2;
        l.n_gamma =
            spec.split_covariates.size() + (spec.split_intercept ? 1 : 0);
        break;
      case Family::nb_ogev:
        l.r_free = true;
        [[fallthrough]];
      case Family::poisson_ogev:
        l.n_omega = spec.count_specific_terms.size();
        l.n_theta =
            spec.rho_covariates.size() + (spec.rho_intercept ? 1 : 0);
        break;
    }
    return l;
  }

  std::size_t beta_offset() const { return 0; }
  std::size_t threshold_offset() const { return n_beta; }
  std::size_t sigma2_offset() const { return n_beta + n_thresholds; }
  std::size_t gamma_offset() const {
    return sigma2_offset() + (sigma2_free ? 1 : 0);
  }
  std::size_t r_offset() const { return gamma_offset() + n_gamma; }
  std::size_t omega_offset() const { return r_offset() + (r_free ? 1 : 0); }
  std::size_t theta_offset() const { return omega_offset() + n_omega; }
  std::size_t size() const { return theta_offset() + n_theta; }
};

// Checks that a constrained ParamSet has the dimensions the layout demands.
inline void check_params(const ParamSet& p, const ParamLayout& l) {
  auto expect = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
      throw DimensionError(std::string(what) + ": expected " +
                           std::to_string(want) + " entries, got " +
                           std::to_string(got));
    }
  };
  expect(p.beta.size(), l.n_beta, "beta");
  expect(p.thresholds.size(), l.n_thresholds, "thresholds");
  expect(p.gamma.size(), l.n_gamma, "gamma");
  expect(p.omega.size(), l.n_omega, "omega");
  expect(p.theta.size(), l.n_theta, "theta");
  for (double b : p.beta) numeric::require_finite(b, "beta");
  for (double g : p.gamma) numeric::require_finite(g, "gamma");
  for (double o : p.omega) numeric::require_finite(o, "omega");
  for (double t : p.theta) numeric::require_finite(t, "theta");
  for (std::size_t j = 0; j < p.thresholds.size(); ++j) {
    numeric::require_finite(p.thresholds[j], "threshold");
    if (j > 0 && !(p.thresholds[j] > p.thresholds[j - 1])) {
      throw NumericError("thresholds must be strictly increasing");
    }
  }
  if (l.sigma2_free) numeric::require_finite(p.log_sigma2, "log_sigma2");
  if (l.r_free) numeric::require_finite(p.log_r, "log_r");
}

inline std::vector<double> pack_parameters(const ParamSet& p,
                                           const ParamLayout& l) {
  check_params(p, l);
  std::vector<double> x(l.size());
  std::copy(p.beta.begin(), p.beta.end(), x.begin() + l.beta_offset());
  for (std::size_t j = 0; j < l.n_thresholds; ++j) {
    x[l.threshold_offset() + j] =
        j == 0 ? p.thresholds[0]
               : std::log(p.thresholds[j] - p.thresholds[j - 1]);
  }
  if (l.sigma2_free) x[l.sigma2_offset()] = p.log_sigma2;
  std::copy(p.gamma.begin(), p.gamma.end(), x.begin() + l.gamma_offset());
  if (l.r_free) x[l.r_offset()] = p.log_r;
  std::copy(p.omega.begin(), p.omega.end(), x.begin() + l.omega_offset());
  std::copy(p.theta.begin(), p.theta.end(), x.begin() + l.theta_offset());
  return x;
}

inline ParamSet unpack_parameters(std::span<const double> x,
                                  const ParamLayout& l) {
  if (x.size() != l.size()) {
    throw DimensionError("unconstrained vector has wrong length");
  }
  ParamSet p;
  p.beta.assign(x.begin() + l.beta_offset(),
                x.begin() + l.beta_offset() + l.n_beta);
  p.thresholds.resize(l.n_thresholds);
  for (std::size_t j = 0; j < l.n_thresholds; ++j) {
    const double u = x[l.threshold_offset() + j];
    p.thresholds[j] = j == 0 ? u : p.thresholds[j - 1] + std::exp(u);
  }
  p.log_sigma2 = l.sigma2_free ? x[l.sigma2_offset()] : 0.0;
  p.gamma.assign(x.begin() + l.gamma_offset(),
                 x.begin() + l.gamma_offset() + l.n_gamma);
  p.log_r = l.r_free ? x[l.r_offset()] : 0.0;
  p.omega.assign(x.begin() + l.omega_offset(),
                 x.begin() + l.omega_offset() + l.n_omega);
  p.theta.assign(x.begin() + l.theta_offset(),
                 x.begin() + l.theta_offset() + l.n_theta);
  return p;
}

// Labels aligned with the unconstrained vector; used for report output.
inline std::vector<std::string> unconstrained_labels(const ModelSpec& spec,
                                                     const ParamLayout& l) {
  std::vector<std::string> out;
  out.reserve(l.size());
  for (std::size_t j = 0; j < l.n_beta; ++j) {
    out.push_back("beta:" + spec.index_covariates[j].column);
  }
  for (std::size_t j = 0; j < l.n_thresholds; ++j) {
    // For the split family the latent cuts start at delta_2.
    const int idx = static_cast<int>(j) +
                    (spec.family == Family::split_oev_gamma ? 2 : 1);
    out.push_back(j == 0 ? "threshold:" + std::to_string(idx)
                         : "log_increment:" + std::to_string(idx));
  }
  if (l.sigma2_free) out.push_back("log_sigma2");
  if (l.n_gamma > 0) {
    if (spec.split_intercept) out.push_back("gamma:const");
    for (const auto& c : spec.split_covariates) {
      out.push_back("gamma:" + c.column);
    }
  }
  if (l.r_free) out.push_back("log_r");
  for (const auto& t : spec.count_specific_terms) {
    out.push_back("omega:" + std::to_string(t.level) + ":" + t.column);
  }
  if (l.n_theta > 0) {
    if (spec.rho_intercept) out.push_back("theta:const");
    for (const auto& c : spec.rho_covariates) {
      out.push_back("theta:" + c.column);
    }
  }
  return out;
}

// Natural-scale view of the estimates for reporting: thresholds as deltas,
// sigma2 and r exponentiated, and rho when the allocation parameter is a
// lone intercept. The jacobian rows enable delta-method standard errors.
struct ConstrainedReport {
  std::vector<std::string> labels;
  std::vector<double> values;
  std::vector<std::vector<double>> jacobian;  // d value_i / d x_j
};

inline ConstrainedReport constrained_report(std::span<const double> x,
                                            const ModelSpec& spec,
                                            const ParamLayout& l) {
  const ParamSet p = unpack_parameters(x, l);
  ConstrainedReport rep;
  auto push = [&](std::string label, double value, std::vector<double> row) {
    rep.labels.push_back(std::move(label));
    rep.values.push_back(value);
    rep.jacobian.push_back(std::move(row));
  };
  auto unit_row = [&](std::size_t j) {
    std::vector<double> row(l.size(), 0.0);
    row[j] = 1.0;
    return row;
  };
  for (std::size_t j = 0; j < l.n_beta; ++j) {
    push("beta:" + spec.index_covariates[j].column, p.beta[j],
         unit_row(l.beta_offset() + j));
  }
  for (std::size_t j = 0; j < l.n_thresholds; ++j) {
    std::vector<double> row(l.size(), 0.0);
    row[l.threshold_offset()] = 1.0;
    for (std::size_t i = 1; i <= j; ++i) {
      row[l.threshold_offset() + i] = std::exp(x[l.threshold_offset() + i]);
    }
    const int idx = static_cast<int>(j) +
                    (spec.family == Family::split_oev_gamma ? 2 : 1);
    push("threshold:" + std::to_string(idx), p.thresholds[j], std::move(row));
  }
  if (l.sigma2_free) {
    std::vector<double> row(l.size(), 0.0);
    row[l.sigma2_offset()] = std::exp(p.log_sigma2);
    push("sigma2", std::exp(p.log_sigma2), std::move(row));
  }
  if (l.n_gamma > 0) {
    std::size_t j = 0;
    if (spec.split_intercept) {
      push("gamma:const", p.gamma[0], unit_row(l.gamma_offset() + j)), ++j;
    }
    for (const auto& c : spec.split_covariates) {
      push("gamma:" + c.column, p.gamma[j], unit_row(l.gamma_offset() + j));
      ++j;
    }
  }
  if (l.r_free) {
    std::vector<double> row(l.size(), 0.0);
    row[l.r_offset()] = std::exp(p.log_r);
    push("r", std::exp(p.log_r), std::move(row));
  }
  for (std::size_t j = 0; j < l.n_omega; ++j) {
    const auto& t = spec.count_specific_terms[j];
    push("omega:" + std::to_string(t.level) + ":" + t.column, p.omega[j],
         unit_row(l.omega_offset() + j));
  }
  if (l.n_theta == 1 && spec.rho_intercept) {
    const double rho = numeric::logistic(p.theta[0]);
    std::vector<double> row(l.size(), 0.0);
    row[l.theta_offset()] = rho * (1.0 - rho);
    push("rho", rho, std::move(row));
  } else if (l.n_theta > 0) {
    std::size_t j = 0;
    if (spec.rho_intercept) {
      push("theta:const", p.theta[0], unit_row(l.theta_offset() + j)), ++j;
    }
    for (const auto& c : spec.rho_covariates) {
      push("theta:" + c.column, p.theta[j], unit_row(l.theta_offset() + j));
      ++j;
    }
  }
  return rep;
}

// Constants/thresholds-only model of the same family, used as the
// rho-squared baseline.
inline ModelSpec null_spec(const ModelSpec& spec) {
  ModelSpec ns;
  ns.family = spec.family;
  ns.top_code = spec.top_code;
  switch (spec.family) {
    case Family::oev_gamma:
      break;  // saturated thresholds alone
    case Family::split_oev_gamma:
      ns.split_intercept = true;
      break;
    case Family::nb_ogev:
    case Family::poisson_ogev:
      ns.index_covariates = {{kConstColumn, Transform::identity}};
      break;
  }
  return ns;
}

// Default starting point: zero coefficients, thresholds read off the
// observed cumulative shares through the alpha = 1, v = 0 baseline link.
inline ParamSet default_init(const ModelSpec& spec, const ParamLayout& l,
                             const Dataset& data) {
  ParamSet p;
  p.beta.assign(l.n_beta, 0.0);
  p.gamma.assign(l.n_gamma, 0.0);
  p.omega.assign(l.n_omega, 0.0);
  p.theta.assign(l.n_theta, 0.0);
  if (l.n_thresholds > 0) {
    const std::size_t n = data.n();
    const bool split = spec.family == Family::split_oev_gamma;
    // Upper-tail counts: for the split family the latent part conditions on
    // positive frequency and its first cut sits between 1 and 2.
    std::vector<std::size_t> at_or_above(l.n_thresholds, 0);
    std::size_t base = 0;
    for (int f : data.freq()) {
      const int shifted = split ? f - 1 : f;
      if (split && f == 0) continue;
      ++base;
      for (std::size_t j = 0; j < l.n_thresholds; ++j) {
        if (shifted >= static_cast<int>(j) + 1) ++at_or_above[j];
      }
    }
    if (!split) base = n;
    p.thresholds.resize(l.n_thresholds);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < l.n_thresholds; ++j) {
      const double floor_share = base > 0 ? 1.0 / (2.0 * base) : 0.5;
      double share = base > 0
                         ? static_cast<double>(at_or_above[j]) / base
                         : 0.5;
      share = std::clamp(share, floor_share, 1.0 - floor_share);
      double delta = std::log((1.0 - share) / share);
      if (delta <= prev) delta = prev + 1e-6;
      p.thresholds[j] = delta;
      prev = delta;
    }
  }
  return p;
}

namespace detail {

// Per-observation log-probability and chain-rule pieces for a telescoped
// ordered system with M thresholds over categories 0..M. Used directly by
// oev_gamma and for the latent positive part of the split family.
struct OrderedObsEval {
  double log_prob = 0.0;
  double dv = 0.0;          // d log p / d v
  double dlog_alpha = 0.0;  // d log p / d log(alpha)
  int k1 = 0;               // threshold indices with nonzero gradient
  int k2 = 0;               // (1-based; 0 means unused)
  double g1 = 0.0;
  double g2 = 0.0;
};

inline OrderedObsEval ordered_obs_eval(int f, int M, const double* thr,
                                       double v, double alpha,
                                       double log_alpha, bool want_grad) {
  auto piece = [&](int k, double& ls, double& sig, double& dla) {
    const double t = thr[k - 1] - v - log_alpha;
    const double sp = numeric::softplus(t);
    ls = -alpha * sp;
    sig = numeric::logistic(t);
    dla = -alpha * (sp - sig);
  };
  OrderedObsEval out;
  if (f == M) {
    double ls, sig, dla;
    piece(M, ls, sig, dla);
    out.log_prob = ls;
    if (want_grad) {
      out.dv = alpha * sig;
      out.dlog_alpha = dla;
      out.k1 = M;
      out.g1 = -alpha * sig;
    }
    return out;
  }
  double ls_hi = 0.0, sig_hi = 0.0, dla_hi = 0.0;  // boundary S(0) = 1
  if (f >= 1) piece(f, ls_hi, sig_hi, dla_hi);
  double ls_lo, sig_lo, dla_lo;
  piece(f + 1, ls_lo, sig_lo, dla_lo);
  const double d = ls_lo - ls_hi;  // <= 0
  out.log_prob = ls_hi + numeric::log1mexp(d);
  if (!want_grad || out.log_prob == numeric::neg_inf) return out;
  const double w = std::exp(d);
  const double denom = -std::expm1(d);  // 1 - w, accurate near w = 1
  out.dv = (alpha * sig_hi - w * alpha * sig_lo) / denom;
  out.dlog_alpha = (dla_hi - w * dla_lo) / denom;
  if (f >= 1) {
    out.k1 = f;
    out.g1 = -alpha * sig_hi / denom;
  }
  out.k2 = f + 1;
  out.g2 = w * alpha * sig_lo / denom;
  return out;
}

}  // namespace detail

// A model bound to a dataset: covariate columns resolved to indices so the
// likelihood loop never touches string keys. Works for both full and null
// specifications (a null ordered spec legitimately has no index covariates).
class PreparedModel {
 public:
  PreparedModel(ModelSpec spec, const Dataset& data, bool fix_sigma2 = false)
      : spec_(std::move(spec)),
        layout_(ParamLayout::for_spec(spec_, fix_sigma2)),
        data_(&data) {
    auto resolve = [&](const CovariateRef& c) {
      if (c.column == kConstColumn) return -1;
      const auto j = data.column_index(c.column);
      if (!j) {
        throw DataError("column '" + c.column + "' not found in the dataset");
      }
      return static_cast<int>(*j);
    };
    for (const auto& c : spec_.index_covariates) {
      index_cols_.push_back(resolve(c));
    }
    if (spec_.split_intercept) split_cols_.push_back(-1);
    for (const auto& c : spec_.split_covariates) {
      split_cols_.push_back(resolve(c));
    }
    if (spec_.rho_intercept) rho_cols_.push_back(-1);
    for (const auto& c : spec_.rho_covariates) {
      rho_cols_.push_back(resolve(c));
    }
    for (const auto& t : spec_.count_specific_terms) {
      term_cols_.push_back(
          resolve(CovariateRef{t.column, t.transform}));
      term_levels_.push_back(t.level);
    }
    lgamma_table_.resize(spec_.top_code + 1);
    for (int y = 0; y <= spec_.top_code; ++y) {
      lgamma_table_[y] = std::lgamma(y + 1.0);
    }
    for (int f : data.freq()) {
      if (f < 0 || f > spec_.top_code) {
        throw DataError("freq outside 0..top_code in dataset");
      }
    }
  }

  const ModelSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t n() const { return data_->n(); }

  // Quantities that depend only on the parameter vector, shared by every
  // observation; rebuilt once per optimizer evaluation.
  struct Workspace {
    ParamSet params;
    double alpha = 1.0;
    double log_alpha = 0.0;
    std::vector<double> exp_u;     // exp of the log-increment slots
    double r = 1.0;
    double log_r = 0.0;
    std::vector<double> comb;      // sum_{j<y} log1p(j/r)
    std::vector<double> dcomb;     // sum_{j<y} j/(r+j)
  };

  // Reusable per-worker buffers for the count-family evaluation.
  struct Scratch {
    std::vector<double> util;
    std::vector<double> row;
    ogev::Eval eval;
  };

  Workspace prepare(std::span<const double> x) const {
    Workspace ws;
    ws.params = unpack_parameters(x, layout_);
    if (is_ordered_family(spec_.family)) {
      ws.log_alpha = ws.params.log_sigma2;
      ws.alpha = std::exp(ws.log_alpha);
      ws.exp_u.resize(layout_.n_thresholds);
      for (std::size_t j = 1; j < layout_.n_thresholds; ++j) {
        ws.exp_u[j] = std::exp(x[layout_.threshold_offset() + j]);
      }
    } else {
      ws.log_r = ws.params.log_r;
      ws.r = std::exp(ws.log_r);
      const int C = spec_.top_code;
      ws.comb.resize(C + 1);
      ws.dcomb.resize(C + 1);
      ws.comb[0] = ws.dcomb[0] = 0.0;
      for (int y = 1; y <= C; ++y) {
        const double j = y - 1;
        ws.comb[y] = ws.comb[y - 1] + (j > 0 ? std::log1p(j / ws.r) : 0.0);
        ws.dcomb[y] = ws.dcomb[y - 1] + (j > 0 ? j / (ws.r + j) : 0.0);
      }
    }
    return ws;
  }

  // log Pr(freq_i | params); when grad is non-null, the derivative with
  // respect to the unconstrained vector is accumulated into it.
  double log_prob(std::size_t i, const Workspace& ws, Scratch& scratch,
                  double* grad) const {
    switch (spec_.family) {
      case Family::oev_gamma:
        return ordered_log_prob(i, ws, grad);
      case Family::split_oev_gamma:
        return split_log_prob(i, ws, grad);
      default:
        return count_log_prob(i, ws, scratch, grad);
    }
  }

 private:
  double value(int col, std::size_t i) const {
    return col < 0 ? 1.0 : data_->column(col)[i];
  }

  double linear_index(const std::vector<int>& cols,
                      std::span<const double> coef, std::size_t i) const {
    double v = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      v += coef[j] * value(cols[j], i);
    }
    return v;
  }

  // Chain rule through delta_k = u_1 + sum_{2<=j<=k} exp(u_j).
  void add_threshold_grad(int k, double g, const Workspace& ws,
                          double* grad) const {
    if (k <= 0 || g == 0.0) return;
    grad[layout_.threshold_offset()] += g;
    for (int j = 1; j < k; ++j) {
      grad[layout_.threshold_offset() + j] += g * ws.exp_u[j];
    }
  }

  double ordered_log_prob(std::size_t i, const Workspace& ws,
                          double* grad) const {
    const int f = data_->freq()[i];
    const double v = linear_index(index_cols_, ws.params.beta, i);
    const auto e = detail::ordered_obs_eval(
        f, spec_.top_code, ws.params.thresholds.data(), v, ws.alpha,
        ws.log_alpha, grad != nullptr);
    if (grad && e.log_prob != numeric::neg_inf) {
      for (std::size_t j = 0; j < layout_.n_beta; ++j) {
        grad[layout_.beta_offset() + j] += e.dv * value(index_cols_[j], i);
      }
      add_threshold_grad(e.k1, e.g1, ws, grad);
      add_threshold_grad(e.k2, e.g2, ws, grad);
      if (layout_.sigma2_free) grad[layout_.sigma2_offset()] += e.dlog_alpha;
    }
    return e.log_prob;
  }

  double split_log_prob(std::size_t i, const Workspace& ws,
                        double* grad) const {
    const int f = data_->freq()[i];
    const double s = linear_index(split_cols_, ws.params.gamma, i);
    if (f == 0) {
      if (grad) {
        const double one_minus_f = numeric::logistic(-s);
        for (std::size_t j = 0; j < layout_.n_gamma; ++j) {
          grad[layout_.gamma_offset() + j] +=
              one_minus_f * value(split_cols_[j], i);
        }
      }
      return numeric::log_logistic(s);
    }
    double lp = numeric::log_logistic(-s);  // log(1 - F)
    if (grad) {
      const double F = numeric::logistic(s);
      for (std::size_t j = 0; j < layout_.n_gamma; ++j) {
        grad[layout_.gamma_offset() + j] -= F * value(split_cols_[j], i);
      }
    }
    const int M = spec_.top_code - 1;  // latent categories 0..M <-> 1..C
    if (M == 0) return lp;             // all positive mass on category 1
    const double v = linear_index(index_cols_, ws.params.beta, i);
    const auto e = detail::ordered_obs_eval(
        f - 1, M, ws.params.thresholds.data(), v, ws.alpha, ws.log_alpha,
        grad != nullptr);
    if (e.log_prob == numeric::neg_inf) return numeric::neg_inf;
    if (grad) {
      for (std::size_t j = 0; j < layout_.n_beta; ++j) {
        grad[layout_.beta_offset() + j] += e.dv * value(index_cols_[j], i);
      }
      add_threshold_grad(e.k1, e.g1, ws, grad);
      add_threshold_grad(e.k2, e.g2, ws, grad);
      if (layout_.sigma2_free) grad[layout_.sigma2_offset()] += e.dlog_alpha;
    }
    return lp + e.log_prob;
  }

  double count_log_prob(std::size_t i, const Workspace& ws, Scratch& scratch,
                        double* grad) const {
    const int f = data_->freq()[i];
    const int C = spec_.top_code;
    const bool nb = spec_.family == Family::nb_ogev;
    const double v = linear_index(index_cols_, ws.params.beta, i);
    // r/(r+lambda), the NB damping of the mean channel.
    const double pr = nb ? numeric::logistic(ws.log_r - v) : 1.0;
    const double lse_rv = nb ? numeric::log_sum_exp(ws.log_r, v) : 0.0;

    scratch.util.assign(C + 1, 0.0);
    for (int y = 0; y <= C; ++y) {
      scratch.util[y] = nb ? y * ws.log_r + ws.comb[y] - lgamma_table_[y] +
                                 y * (v - lse_rv)
                           : y * v - lgamma_table_[y];
    }
    for (std::size_t t = 0; t < term_cols_.size(); ++t) {
      scratch.util[term_levels_[t]] +=
          ws.params.omega[t] * value(term_cols_[t], i);
    }
    double rho = 1.0, rho_index = 0.0;
    if (layout_.n_theta > 0) {
      rho_index = linear_index(rho_cols_, ws.params.theta, i);
      rho = numeric::logistic(rho_index);
      if (rho <= 0.0) throw NumericError("rho underflowed to 0");
    }
    ogev::evaluate_into(scratch.eval, scratch.util, rho);
    const double lp = scratch.eval.log_prob(f);
    if (!grad) return lp;

    scratch.row.assign(C + 1, 0.0);
    double drho = 0.0;
    scratch.eval.dlog_row(f, scratch.row, drho);
    double mrow = 0.0;
    for (int m = 0; m <= C; ++m) mrow += m * scratch.row[m];
    const double gv = nb ? pr * mrow : mrow;
    for (std::size_t j = 0; j < layout_.n_beta; ++j) {
      grad[layout_.beta_offset() + j] += gv * value(index_cols_[j], i);
    }
    if (layout_.r_free) {
      double gr = (1.0 - pr) * mrow;
      for (int m = 1; m <= C; ++m) gr -= scratch.row[m] * ws.dcomb[m];
      grad[layout_.r_offset()] += gr;
    }
    for (std::size_t t = 0; t < term_cols_.size(); ++t) {
      grad[layout_.omega_offset() + t] +=
          scratch.row[term_levels_[t]] * value(term_cols_[t], i);
    }
    if (layout_.n_theta > 0) {
      const double drho_dindex = rho * (1.0 - rho);
      for (std::size_t j = 0; j < layout_.n_theta; ++j) {
        grad[layout_.theta_offset() + j] +=
            drho * drho_dindex * value(rho_cols_[j], i);
      }
    }
    return lp;
  }

  ModelSpec spec_;
  ParamLayout layout_;
  const Dataset* data_;
  std::vector<int> index_cols_;
  std::vector<int> split_cols_;
  std::vector<int> rho_cols_;
  std::vector<int> term_cols_;
  std::vector<int> term_levels_;
  std::vector<double> lgamma_table_;
};

// Full category pmf for one observation given constrained parameters.
// Shared by the simulator and the marginal-effects module.
// Covariate value as the kernels see it: 'const' is identically 1.
inline double observation_value(const Observation& obs,
                                const std::string& column) {
  if (column == kConstColumn) return 1.0;
  const auto it = obs.covariates.find(column);
  if (it == obs.covariates.end()) {
    throw DataError("observation is missing covariate '" + column + "'");
  }
  return it->second;
}

// coef' [1?, covariates...] with an optional leading intercept slot.
inline double linear_index(const Observation& obs,
                           const std::vector<CovariateRef>& covs,
                           const std::vector<double>& coef, bool intercept) {
  double out = 0.0;
  std::size_t j = 0;
  if (intercept) out += coef[j++];
  for (const auto& c : covs) out += coef[j++] * observation_value(obs, c.column);
  return out;
}

inline std::vector<double> category_pmf(const ModelSpec& spec,
                                        const ParamSet& params,
                                        const Observation& obs) {
  check_params(params, ParamLayout::for_spec(spec));
  auto value = [&](const std::string& column) {
    return observation_value(obs, column);
  };
  auto dot = [&](const std::vector<CovariateRef>& covs,
                 const std::vector<double>& coef, bool intercept) {
    return linear_index(obs, covs, coef, intercept);
  };
  const double v = dot(spec.index_covariates, params.beta, false);
  switch (spec.family) {
    case Family::oev_gamma: {
      OrderedKernelInput in{v, std::exp(params.log_sigma2),
                            params.thresholds};
      return gamma_oev_pmf(in, spec.top_code);
    }
    case Family::split_oev_gamma: {
      const double s =
          dot(spec.split_covariates, params.gamma, spec.split_intercept);
      OrderedKernelInput in{v, std::exp(params.log_sigma2),
                            params.thresholds};
      return split_oev_pmf(s, in, spec.top_code);
    }
    default: {
      CountUtilityInput in;
      in.lambda = std::exp(v);
      in.r = std::exp(params.log_r);
      in.eta.assign(spec.top_code + 1, 0.0);
      for (std::size_t t = 0; t < spec.count_specific_terms.size(); ++t) {
        const auto& term = spec.count_specific_terms[t];
        in.eta[term.level] += params.omega[t] * value(term.column);
      }
      in.rho = 1.0;
      if (spec.rho_intercept || !spec.rho_covariates.empty()) {
        in.rho = numeric::logistic(
            dot(spec.rho_covariates, params.theta, spec.rho_intercept));
      }
      return count_choice_pmf(in, spec.family, spec.top_code);
    }
  }
}

}  // namespace freqchoice
