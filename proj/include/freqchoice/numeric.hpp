#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace freqchoice {

// Raised when a kernel receives a non-finite or out-of-domain numeric input.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a vector argument has the wrong length for the requested model.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

namespace numeric {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline void require_finite(double x, const char* name) {
  if (!std::isfinite(x)) {
    throw NumericError(std::string(name) + " must be finite");
  }
}

// log(1 + e^x), accurate over the whole real line.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// e^s / (1 + e^s); stable for |s| up to ~700.
inline double logistic(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double es = std::exp(s);
  return es / (1.0 + es);
}

// log of logistic(s) = -softplus(-s); never underflows to -inf for finite s.
inline double log_logistic(double s) { return -softplus(-s); }

// log(e^a + e^b) with -inf treated as an empty term.
inline double log_sum_exp(double a, double b) {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = neg_inf;
  for (double x : xs) m = std::max(m, x);
  if (m == neg_inf) return neg_inf;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

// log(1 - e^x) for x <= 0; -inf at x == 0.
inline double log1mexp(double x) {
  if (x >= 0.0) {
    if (x == 0.0) return neg_inf;
    throw NumericError("log1mexp requires x <= 0");
  }
  // Split at -ln 2 per the usual accuracy analysis.
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

// Fixed-chunk sum: results are independent of how chunks are assigned to
// workers, so parallel reductions reproduce the serial result bit for bit.
inline constexpr std::size_t reduction_chunk = 1024;

inline double chunked_sum(std::span<const double> xs) {
  double total = 0.0;
  for (std::size_t begin = 0; begin < xs.size(); begin += reduction_chunk) {
    const std::size_t end = std::min(begin + reduction_chunk, xs.size());
    double part = 0.0;
    for (std::size_t i = begin; i < end; ++i) part += xs[i];
    total += part;
  }
  return total;
}

}  // namespace numeric
}  // namespace freqchoice
