#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace freqchoice {

class SpecError : public std::runtime_error {
 public:
  explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class StateError : public std::runtime_error {
 public:
  explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

enum class Family { oev_gamma, split_oev_gamma, nb_ogev, poisson_ogev };

inline bool is_ordered_family(Family f) {
  return f == Family::oev_gamma || f == Family::split_oev_gamma;
}
inline bool is_count_family(Family f) {
  return f == Family::nb_ogev || f == Family::poisson_ogev;
}

inline const char* family_name(Family f) {
  switch (f) {
    case Family::oev_gamma: return "oev_gamma";
    case Family::split_oev_gamma: return "split_oev_gamma";
    case Family::nb_ogev: return "nb_ogev";
    case Family::poisson_ogev: return "poisson_ogev";
  }
  return "?";
}

inline Family family_from_name(const std::string& name) {
  if (name == "oev_gamma") return Family::oev_gamma;
  if (name == "split_oev_gamma") return Family::split_oev_gamma;
  if (name == "nb_ogev") return Family::nb_ogev;
  if (name == "poisson_ogev") return Family::poisson_ogev;
  throw SpecError("unknown family '" + name + "'");
}

enum class Transform { identity, natural_log };

inline const char* transform_name(Transform t) {
  return t == Transform::identity ? "identity" : "natural_log";
}

inline Transform transform_from_name(const std::string& name) {
  if (name == "identity") return Transform::identity;
  if (name == "natural_log") return Transform::natural_log;
  throw SpecError("unknown transform '" + name + "'");
}

// Reserved column name that always evaluates to 1.0; it never has to be
// present in the data and serves as the intercept column.
inline constexpr const char* kConstColumn = "const";

struct CovariateRef {
  std::string column;
  Transform transform = Transform::identity;

  bool operator==(const CovariateRef&) const = default;
};

// One count-specific utility term: adds omega * value(column) to the
// systematic utility of count level `level` only.
struct CountTerm {
  int level = 0;
  std::string column;
  Transform transform = Transform::identity;

  bool operator==(const CountTerm&) const = default;
};

struct ModelSpec {
  Family family = Family::oev_gamma;
  int top_code = 6;  // categories are 0..top_code, top bin read as "top_code+"

  std::vector<CovariateRef> index_covariates;  // beta'x

  // Split family only: gamma'z for the zero hurdle.
  bool split_intercept = false;
  std::vector<CovariateRef> split_covariates;

  // Count families only.
  std::vector<CountTerm> count_specific_terms;  // eta_y = sum omega*b
  bool rho_intercept = false;
  std::vector<CovariateRef> rho_covariates;  // rho = logistic(theta'w)

  // Filled in by validate_spec.
  std::size_t free_parameter_count = 0;
};

// One respondent: observed frequency category plus named covariate values.
// Used at API boundaries; bulk estimation runs off Dataset's columns.
struct Observation {
  int freq = 0;
  std::map<std::string, double> covariates;
};

// Column-major immutable dataset. Covariate transforms requested by the
// ModelSpec are applied at ingestion, so stored values feed kernels directly.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<std::string> column_names, std::vector<int> freq,
          std::vector<std::vector<double>> columns)
      : column_names_(std::move(column_names)),
        freq_(std::move(freq)),
        columns_(std::move(columns)) {
    if (columns_.size() != column_names_.size()) {
      throw DataError("column count does not match column names");
    }
    for (const auto& col : columns_) {
      if (col.size() != freq_.size()) {
        throw DataError("ragged dataset: column length mismatch");
      }
    }
  }

  explicit Dataset(const std::vector<Observation>& observations) {
    if (!observations.empty()) {
      for (const auto& [name, v] : observations.front().covariates) {
        column_names_.push_back(name);
      }
      columns_.resize(column_names_.size());
    }
    for (const auto& obs : observations) {
      if (obs.covariates.size() != column_names_.size()) {
        throw DataError("observations do not share the same covariate keys");
      }
      freq_.push_back(obs.freq);
      for (std::size_t j = 0; j < column_names_.size(); ++j) {
        auto it = obs.covariates.find(column_names_[j]);
        if (it == obs.covariates.end()) {
          throw DataError("observations do not share the same covariate keys");
        }
        columns_[j].push_back(it->second);
      }
    }
  }

  std::size_t n() const { return freq_.size(); }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const std::vector<int>& freq() const { return freq_; }
  const std::vector<double>& column(std::size_t j) const { return columns_[j]; }

  std::optional<std::size_t> column_index(const std::string& name) const {
    for (std::size_t j = 0; j < column_names_.size(); ++j) {
      if (column_names_[j] == name) return j;
    }
    return std::nullopt;
  }

  Observation observation(std::size_t i) const {
    Observation obs;
    obs.freq = freq_[i];
    for (std::size_t j = 0; j < column_names_.size(); ++j) {
      obs.covariates[column_names_[j]] = columns_[j][i];
    }
    return obs;
  }

 private:
  std::vector<std::string> column_names_;
  std::vector<int> freq_;
  std::vector<std::vector<double>> columns_;  // one vector per column
};

// All free parameters of one model in constrained form. Thresholds are kept
// as the delta vector itself; strict monotonicity is enforced structurally by
// the unconstrained packing (first value plus log-increments), see model.hpp.
struct ParamSet {
  std::vector<double> beta;        // aligned to index_covariates
  std::vector<double> thresholds;  // C entries (ordered) or C-1 (split)
  double log_sigma2 = 0.0;         // Gamma heterogeneity, ordered families
  std::vector<double> gamma;       // intercept first when present
  double log_r = 0.0;              // NB dispersion
  std::vector<double> omega;       // aligned to count_specific_terms
  std::vector<double> theta;       // intercept first when present
};

}  // namespace freqchoice
