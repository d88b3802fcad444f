#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace freqchoice::linalg {

// Dense symmetric matrices stored row-major (n*n doubles). Sizes here are
// the free-parameter counts of a single model, so O(n^3) with n <= ~60.

// In-place Cholesky factorization A = L L^T (lower triangle of `a` becomes
// L; upper triangle is left untouched). Returns false when a pivot is not
// strictly positive, i.e. A is not positive definite.
inline bool cholesky_factor(std::vector<double>& a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * n + j];
      for (std::size_t m = 0; m < j; ++m) {
        sum -= a[i * n + m] * a[j * n + m];
      }
      if (i == j) {
        if (!(sum > 0.0)) return false;
        a[i * n + i] = std::sqrt(sum);
      } else {
        a[i * n + j] = sum / a[j * n + j];
      }
    }
  }
  return true;
}

// Inverse of a symmetric positive-definite matrix, or nullopt when the
// Cholesky factorization fails.
inline std::optional<std::vector<double>> spd_inverse(std::vector<double> a,
                                                      std::size_t n) {
  if (!cholesky_factor(a, n)) return std::nullopt;
  // Invert the lower-triangular factor column by column.
  std::vector<double> li(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    li[j * n + j] = 1.0 / a[j * n + j];
    for (std::size_t i = j + 1; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t m = j; m < i; ++m) {
        sum += a[i * n + m] * li[m * n + j];
      }
      li[i * n + j] = -sum / a[i * n + i];
    }
  }
  // A^{-1} = L^{-T} L^{-1}.
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = 0.0;
      for (std::size_t m = i; m < n; ++m) {
        sum += li[m * n + i] * li[m * n + j];
      }
      inv[i * n + j] = sum;
      inv[j * n + i] = sum;
    }
  }
  return inv;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
// Used only to report why a Hessian failed its definiteness check.
inline std::vector<double> symmetric_eigenvalues(std::vector<double> a,
                                                 std::size_t n) {
  if (n == 0) return {};
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        s += a[i * n + j] * a[i * n + j];
      }
    }
    return std::sqrt(s);
  };
  double scale = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) {
    scale = std::max(scale, std::abs(a[i]));
  }
  const double tol = 1e-14 * std::max(scale, 1e-300);
  for (int sweep = 0; sweep < 100 && off_norm() > tol * n; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) <= tol) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t m = 0; m < n; ++m) {
          const double amp = a[m * n + p];
          const double amq = a[m * n + q];
          a[m * n + p] = c * amp - s * amq;
          a[m * n + q] = s * amp + c * amq;
        }
        for (std::size_t m = 0; m < n; ++m) {
          const double apm = a[p * n + m];
          const double aqm = a[q * n + m];
          a[p * n + m] = c * apm - s * aqm;
          a[q * n + m] = s * apm + c * aqm;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace freqchoice::linalg
