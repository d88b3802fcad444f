#pragma once

// Side-by-side ranking of fitted models on one dataset: AIC-ordered table
// with per-criterion winner flags.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "freqchoice/estimate.hpp"

namespace freqchoice {

struct ComparisonRow {
  std::string label;
  Family family = Family::oev_gamma;
  std::size_t n = 0;
  std::size_t k = 0;
  double ll = 0.0;
  double ll_null = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double rho_squared = 0.0;
  bool best_aic = false;
  bool best_bic = false;
  bool best_rho = false;
  // Set on every row sharing the minimum AIC when that minimum is not
  // unique; such rows keep their input order.
  bool aic_tie = false;
};

// Table ordered by AIC ascending (ties keep input order). Requires at least
// two fits over the same number of observations. Labels default to the
// family name when not supplied.
inline std::vector<ComparisonRow> run_compare(
    const std::vector<FitResult>& fits,
    const std::vector<std::string>& labels = {}) {
  if (fits.size() < 2) {
    throw DataError("model comparison requires at least two fits");
  }
  if (!labels.empty() && labels.size() != fits.size()) {
    throw DataError("expected one label per fit");
  }
  for (const auto& fit : fits) {
    if (fit.n != fits.front().n) {
      throw DataError("fits cover different numbers of observations (" +
                      std::to_string(fits.front().n) + " vs " +
                      std::to_string(fit.n) + "); comparison is undefined");
    }
  }
  std::vector<ComparisonRow> rows(fits.size());
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const FitResult& fit = fits[i];
    rows[i].label = labels.empty() ? family_name(fit.spec.family) : labels[i];
    rows[i].family = fit.spec.family;
    rows[i].n = fit.n;
    rows[i].k = fit.k;
    rows[i].ll = fit.ll_convergence;
    rows[i].ll_null = fit.ll_null;
    rows[i].aic = fit.stats.aic;
    rows[i].bic = fit.stats.bic;
    rows[i].rho_squared = fit.stats.rho_squared;
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) {
                     return a.aic < b.aic;
                   });
  rows.front().best_aic = true;
  if (rows.size() > 1 && rows[1].aic == rows[0].aic) {
    for (auto& row : rows) row.aic_tie = row.aic == rows[0].aic;
  }
  std::size_t bic_winner = 0;
  std::size_t rho_winner = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].bic < rows[bic_winner].bic) bic_winner = i;
    if (rows[i].rho_squared > rows[rho_winner].rho_squared) rho_winner = i;
  }
  rows[bic_winner].best_bic = true;
  rows[rho_winner].best_rho = true;
  return rows;
}

}  // namespace freqchoice
