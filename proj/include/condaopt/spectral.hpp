#pragma once
// Spectral diagnostics: singular spectra and condition numbers, built
// on the singular-values-only path of the Jacobi decomposition so no
// factor matrices are accumulated.

#include <cmath>
#include <limits>
#include <vector>

#include "matrix.hpp"
#include "svd.hpp"

namespace condaopt {

// All singular values of m, descending.
inline std::vector<double> singular_spectrum(const Matrix2D& m) {
  if (!is_finite(m)) throw std::invalid_argument("non-finite matrix");
  return detail::jacobi_singular_values(m);
}

// Ratio of the largest singular value to the smallest one that is still
// numerically nonzero (greater than rank_tol times the largest). A zero
// spectrum has no nonzero singular value and reports +infinity. Expects
// the values in descending order, as singular_spectrum produces them.
inline double condition_number(const std::vector<double>& sigma_descending,
                               double rank_tol = 1e-12) {
  if (sigma_descending.empty()) {
    throw std::invalid_argument("condition number needs a nonempty spectrum");
  }
  const double sigma_max = sigma_descending.front();
  if (sigma_max == 0.0) return std::numeric_limits<double>::infinity();
  double sigma_min = sigma_max;
  for (double s : sigma_descending) {
    if (s > rank_tol * sigma_max) sigma_min = s;
  }
  return sigma_max / sigma_min;
}

inline double condition_number(const Matrix2D& m, double rank_tol = 1e-12) {
  return condition_number(singular_spectrum(m), rank_tol);
}

}  // namespace condaopt
