#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "freqchoice/csv.hpp"
#include "freqchoice/types.hpp"

namespace freqchoice {

namespace detail {

// Every column referenced anywhere in the spec, with its transform. A column
// must carry one consistent transform: values are rewritten in place at
// ingestion, so two different transforms of the same column cannot coexist.
inline std::map<std::string, Transform> transform_map(const ModelSpec& spec) {
  std::map<std::string, Transform> out;
  auto add = [&](const std::string& column, Transform t) {
    if (column == kConstColumn) {
      if (t == Transform::natural_log) {
        throw SpecError("natural_log transform is not valid for 'const'");
      }
      return;
    }
    auto [it, inserted] = out.emplace(column, t);
    if (!inserted && it->second != t) {
      throw SpecError("column '" + column +
                      "' is referenced with conflicting transforms");
    }
  };
  for (const auto& c : spec.index_covariates) add(c.column, c.transform);
  for (const auto& c : spec.split_covariates) add(c.column, c.transform);
  for (const auto& c : spec.rho_covariates) add(c.column, c.transform);
  for (const auto& t : spec.count_specific_terms) add(t.column, t.transform);
  return out;
}

inline void check_no_duplicates(const std::vector<CovariateRef>& list,
                                const char* which) {
  std::set<std::string> seen;
  for (const auto& c : list) {
    if (c.column.empty()) {
      throw SpecError(std::string(which) + " contains an empty column name");
    }
    if (c.column == "freq") {
      throw SpecError("'freq' cannot be used as a covariate");
    }
    if (!seen.insert(c.column).second) {
      throw SpecError(std::string(which) + " lists column '" + c.column +
                      "' twice");
    }
  }
}

}  // namespace detail

// Checks all ModelSpec invariants and fills in free_parameter_count.
// Idempotent: validating a validated spec returns it unchanged.
inline ModelSpec validate_spec(ModelSpec spec) {
  if (spec.top_code < 1) throw SpecError("top_code must be >= 1");
  if (spec.index_covariates.empty()) {
    throw SpecError("index_covariates must be non-empty");
  }
  detail::check_no_duplicates(spec.index_covariates, "index_covariates");
  detail::check_no_duplicates(spec.split_covariates, "split_covariates");
  detail::check_no_duplicates(spec.rho_covariates, "rho_covariates");

  const bool has_split = spec.split_intercept || !spec.split_covariates.empty();
  const bool has_count =
      !spec.count_specific_terms.empty() || spec.rho_intercept ||
      !spec.rho_covariates.empty();

  if (spec.family == Family::split_oev_gamma) {
    if (!has_split) {
      throw SpecError(
          "split_oev_gamma requires split_covariates or a split intercept");
    }
  } else if (has_split) {
    throw SpecError("split_covariates are only valid for split_oev_gamma");
  }
  if (!is_count_family(spec.family) && has_count) {
    throw SpecError(
        "count_specific_terms/rho_covariates are only valid for count "
        "families");
  }

  const int C = spec.top_code;
  std::set<std::pair<int, std::string>> seen_terms;
  std::set<int> const_levels;
  for (const auto& t : spec.count_specific_terms) {
    if (t.level < 0 || t.level > C) {
      throw SpecError("count_specific_terms level " + std::to_string(t.level) +
                      " outside 0.." + std::to_string(C));
    }
    if (t.column.empty() || t.column == "freq") {
      throw SpecError("invalid count_specific_terms column");
    }
    if (!seen_terms.insert({t.level, t.column}).second) {
      throw SpecError("duplicate count-specific term for level " +
                      std::to_string(t.level) + ", column '" + t.column + "'");
    }
    if (t.column == kConstColumn) const_levels.insert(t.level);
  }
  // Identification: a free intercept on every count level would shift all
  // utilities by a constant, which the choice probabilities cannot see.
  if (static_cast<int>(const_levels.size()) == C + 1) {
    throw SpecError(
        "count-specific intercepts on every level are not identified; leave "
        "at least one level without a 'const' term");
  }

  detail::transform_map(spec);  // throws on conflicting transforms

  std::size_t k = spec.index_covariates.size();
  switch (spec.family) {
    case Family::oev_gamma:
      k += static_cast<std::size_t>(C) + 1;  // thresholds + sigma2
      break;
    case Family::split_oev_gamma:
      k += static_cast<std::size_t>(C - 1) + 1;
      k += spec.split_covariates.size() + (spec.split_intercept ? 1 : 0);
      break;
    case Family::nb_ogev:
      k += 1;  // dispersion
      [[fallthrough]];
    case Family::poisson_ogev:
      k += spec.count_specific_terms.size();
      k += spec.rho_covariates.size() + (spec.rho_intercept ? 1 : 0);
      break;
  }
  spec.free_parameter_count = k;
  return spec;
}

// Applies the spec's natural_log transforms in place, leaving unreferenced
// columns untouched. Row indices in errors are 1-based data rows.
inline Dataset apply_transforms(const Dataset& raw, const ModelSpec& spec) {
  const auto transforms = detail::transform_map(spec);
  std::vector<std::vector<double>> columns;
  columns.reserve(raw.column_names().size());
  for (std::size_t j = 0; j < raw.column_names().size(); ++j) {
    columns.push_back(raw.column(j));
    auto it = transforms.find(raw.column_names()[j]);
    if (it == transforms.end() || it->second == Transform::identity) continue;
    for (std::size_t i = 0; i < columns[j].size(); ++i) {
      if (!(columns[j][i] > 0.0)) {
        throw DataError("natural_log of non-positive value in column '" +
                        raw.column_names()[j] + "' at row " +
                        std::to_string(i + 1));
      }
      columns[j][i] = std::log(columns[j][i]);
    }
  }
  return Dataset(raw.column_names(), raw.freq(), std::move(columns));
}

// Parses RFC-4180 CSV (header row required, `freq` column mandatory) and
// applies the spec's covariate transforms. Values > top_code are an error,
// never clamped.
inline Dataset load_dataset(std::istream& source, const ModelSpec& spec) {
  const csv::Table table = csv::read(source);
  if (table.header.empty()) throw DataError("CSV has no header row");

  std::map<std::string, std::size_t> header_index;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (!header_index.emplace(table.header[j], j).second) {
      throw DataError("duplicate CSV column '" + table.header[j] + "'");
    }
  }
  auto freq_it = header_index.find("freq");
  if (freq_it == header_index.end()) {
    throw DataError("required column 'freq' is missing");
  }

  // Only columns the spec actually references are parsed and kept; anything
  // else (IDs, labels) passes through untouched and may be non-numeric.
  std::vector<std::string> column_names;
  std::vector<std::size_t> source_cols;
  for (const auto& [column, t] : detail::transform_map(spec)) {
    auto it = header_index.find(column);
    if (it == header_index.end()) {
      throw DataError("column '" + column + "' referenced by the model spec "
                      "is missing from the data");
    }
    column_names.push_back(column);
    source_cols.push_back(it->second);
  }
  const std::size_t freq_col = freq_it->second;

  std::vector<int> freq;
  std::vector<std::vector<double>> columns(column_names.size());
  freq.reserve(table.rows.size());
  for (auto& col : columns) col.reserve(table.rows.size());

  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string row_label = std::to_string(i + 1);
    if (row.size() != table.header.size()) {
      throw DataError("row " + row_label + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(table.header.size()));
    }
    bool ok = false;
    const double f = csv::parse_double(row[freq_col], ok);
    if (!ok || !std::isfinite(f)) {
      throw DataError("non-numeric freq at row " + row_label);
    }
    if (f != std::floor(f)) {
      throw DataError("freq at row " + row_label + " is not an integer");
    }
    if (f < 0.0 || f > spec.top_code) {
      throw DataError("freq " + csv::format_double(f) + " at row " +
                      row_label + " outside 0..top_code (top_code = " +
                      std::to_string(spec.top_code) + ")");
    }
    freq.push_back(static_cast<int>(f));
    for (std::size_t j = 0; j < source_cols.size(); ++j) {
      const double v = csv::parse_double(row[source_cols[j]], ok);
      if (!ok || !std::isfinite(v)) {
        throw DataError("non-numeric value in column '" + column_names[j] +
                        "' at row " + row_label);
      }
      columns[j].push_back(v);
    }
  }

  Dataset raw(std::move(column_names), std::move(freq), std::move(columns));
  return apply_transforms(raw, spec);
}

// Writes the stored (already transformed) values; reloading with identity
// transforms reproduces them bit for bit.
inline void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  out << "freq";
  for (const auto& name : ds.column_names()) {
    out << ',';
    csv::write_field(out, name);
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out << ds.freq()[i];
    for (std::size_t j = 0; j < ds.column_names().size(); ++j) {
      out << ',' << csv::format_double(ds.column(j)[i]);
    }
    out << '\n';
  }
}

}  // namespace freqchoice
