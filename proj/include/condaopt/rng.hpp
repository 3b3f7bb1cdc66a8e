#pragma once
// Seeded random number generation for experiments and tests.
//
// Generator: xoshiro256++ (Blackman & Vigna), state expanded from the
// 64-bit seed with splitmix64. The stream for a given seed is identical
// across platforms; doubles are built from the top 53 bits, and normal
// deviates use Box-Muller with the spare value cached so consumption
// order is fixed.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"

namespace condaopt {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; the second deviate of each pair is
  // cached so each call consumes a deterministic amount of the stream.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // guard log(0)
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4] = {};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Matrix2D random_gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix2D out(rows, cols);
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = rng.normal();
  return out;
}

// Orthonormalizes the columns of m in place with modified Gram-Schmidt,
// run twice for numerical orthogonality. Columns that collapse under
// projection (norm below 1e-8) are replaced by fresh random draws and
// re-orthogonalized, so the result is always full column rank.
inline void orthonormalize_columns(Matrix2D& m, Rng& rng) {
  const std::size_t rows = m.rows(), cols = m.cols();
  if (cols > rows) {
    throw std::invalid_argument("shape mismatch: cannot orthonormalize more columns than rows");
  }
  for (std::size_t j = 0; j < cols; ++j) {
    for (int attempt = 0;; ++attempt) {
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t prev = 0; prev < j; ++prev) {
          double dot = 0.0;
          for (std::size_t i = 0; i < rows; ++i) dot += m(i, prev) * m(i, j);
          for (std::size_t i = 0; i < rows; ++i) m(i, j) -= dot * m(i, prev);
        }
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < rows; ++i) norm += m(i, j) * m(i, j);
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (std::size_t i = 0; i < rows; ++i) m(i, j) /= norm;
        break;
      }
      if (attempt > 32) {
        throw std::runtime_error("orthonormalization failed to find an independent column");
      }
      for (std::size_t i = 0; i < rows; ++i) m(i, j) = rng.normal();
    }
  }
}

inline Matrix2D random_orthogonal(std::size_t n, Rng& rng) {
  Matrix2D q = random_gaussian(n, n, rng);
  orthonormalize_columns(q, rng);
  return q;
}

// Builds u * diag(sigma) * v^T with orthonormal u (rows x k) and
// v (cols x k), so the singular values of the result are exactly the
// prescribed spectrum (up to round-off).
inline Matrix2D random_with_spectrum(std::size_t rows, std::size_t cols,
                                     const std::vector<double>& sigma, Rng& rng) {
  const std::size_t k = sigma.size();
  if (k == 0 || k > rows || k > cols) {
    throw std::invalid_argument("shape mismatch: spectrum length must be in [1, min(rows, cols)]");
  }
  Matrix2D u = random_gaussian(rows, k, rng);
  orthonormalize_columns(u, rng);
  Matrix2D v = random_gaussian(cols, k, rng);
  orthonormalize_columns(v, rng);
  Matrix2D out(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += u(i, t) * sigma[t] * v(j, t);
      out(i, j) = acc;
    }
  }
  return out;
}

// Log-spaced spectrum from 1 down to `ratio`, the go-to way to build a
// full-rank test matrix with a known condition number.
inline std::vector<double> geometric_spectrum(std::size_t k, double ratio) {
  if (k == 0 || ratio <= 0.0 || ratio > 1.0) {
    throw std::invalid_argument("geometric_spectrum wants k >= 1 and ratio in (0, 1]");
  }
  std::vector<double> sigma(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double frac = (k == 1) ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
    sigma[i] = std::pow(ratio, frac);
  }
  return sigma;
}

}  // namespace condaopt
