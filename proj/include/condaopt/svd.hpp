#pragma once
// Thin singular value decomposition via one-sided Jacobi, plus the
// orthogonal polar factor derived from it.
//
// The iteration runs on whichever orientation makes the implicit Gram
// matrix the small side (the input is transposed first when it is wider
// than tall), and rotates column pairs until every pair is orthogonal
// relative to the column norms. Everything is deterministic: a fixed
// sweep order, a fixed sign convention, and a stable descending sort of
// the singular values.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"

namespace condaopt {

struct SvdFactors {
  Matrix2D u;                 // rows x k, orthonormal columns
  std::vector<double> sigma;  // k = min(rows, cols), descending, nonnegative
  Matrix2D vt;                // k x cols, orthonormal rows
};

namespace detail {

// One-sided Jacobi on the rows of `r` (each row is a column of the
// matrix being factored, stored contiguously for cache-friendly
// rotations). Rows of `vt`, when given, receive the same rotations and
// accumulate the right factor. A pair is rotated only while its dot
// product exceeds 1e-13 of the product of the row norms; the sweep loop
// gives up after 60 full passes.
inline bool jacobi_orthogonalize_rows(Matrix2D& r, Matrix2D* vt) {
  const std::size_t k = r.rows(), len = r.cols();
  constexpr double kRelTol = 1e-13;
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        double* rp = r.row_ptr(p);
        double* rq = r.row_ptr(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          alpha += rp[i] * rp[i];
          beta += rq[i] * rq[i];
          gamma += rp[i] * rq[i];
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::fabs(gamma) <= kRelTol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < len; ++i) {
          const double vp = rp[i], vq = rq[i];
          rp[i] = c * vp - s * vq;
          rq[i] = s * vp + c * vq;
        }
        if (vt != nullptr) {
          double* wp = vt->row_ptr(p);
          double* wq = vt->row_ptr(q);
          for (std::size_t i = 0; i < vt->cols(); ++i) {
            const double vp = wp[i], vq = wq[i];
            wp[i] = c * vp - s * vq;
            wq[i] = s * vp + c * vq;
          }
        }
        rotated = true;
      }
    }
    if (!rotated) return true;
  }
  return false;
}

// Exact power-of-two prescale: scaling the working matrix so its
// largest magnitude lands in [0.5, 1) keeps every Gram quantity of the
// rotation loop out of the overflow and denormal ranges (where the
// relative rotation threshold loses meaning and the sweeps stall).
// Returns the exponent e with max|m| = f * 2^e; the caller scales by
// 2^-e and multiplies the singular values back by 2^e, both exact.
inline int prescale_exponent(const Matrix2D& m) {
  const double mx = max_abs(m);
  if (mx == 0.0) return 0;
  int exp = 0;
  std::frexp(mx, &exp);
  return exp;
}

// Multiplies every entry by 2^k via ldexp. The factor 2^k itself may be
// outside double range (deeply denormal input needs k > 1024), so it is
// never materialized.
inline void scale_pow2(Matrix2D& m, int k) {
  double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) p[i] = std::ldexp(p[i], k);
}

// Descending stable ordering of the singular values.
inline std::vector<std::size_t> descending_order(const std::vector<double>& sigma) {
  std::vector<std::size_t> order(sigma.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&sigma](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });
  return order;
}

// Singular values only (no factor accumulation), same rotation sequence
// as the full decomposition so the values agree bit for bit.
inline std::vector<double> jacobi_singular_values(const Matrix2D& m) {
  Matrix2D r = (m.rows() < m.cols()) ? m : transpose(m);  // k rows, k = min dim
  const int exp = prescale_exponent(r);
  detail::scale_pow2(r, -exp);
  if (!jacobi_orthogonalize_rows(r, nullptr)) {
    throw std::runtime_error("svd no convergence");
  }
  std::vector<double> sigma(r.rows());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    double acc = 0.0;
    const double* row = r.row_ptr(i);
    for (std::size_t j = 0; j < r.cols(); ++j) acc += row[j] * row[j];
    sigma[i] = std::ldexp(std::sqrt(acc), exp);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<double>());
  return sigma;
}

}  // namespace detail

inline SvdFactors thin_svd(const Matrix2D& m) {
  if (!is_finite(m)) throw std::invalid_argument("non-finite matrix");
  const bool transposed = m.rows() < m.cols();
  // r holds the working columns as rows: row i of r is column i of the
  // (possibly transposed) input.
  Matrix2D r = transposed ? m : transpose(m);
  const int exp = detail::prescale_exponent(r);
  detail::scale_pow2(r, -exp);
  const std::size_t k = r.rows(), big = r.cols();
  Matrix2D vt_acc = Matrix2D::identity(k);
  if (!detail::jacobi_orthogonalize_rows(r, &vt_acc)) {
    throw std::runtime_error("svd no convergence");
  }

  // Working-scale singular values (row norms); the published values are
  // rescaled by the prescale exponent at the end.
  std::vector<double> sigma(k);
  for (std::size_t i = 0; i < k; ++i) {
    double acc = 0.0;
    const double* row = r.row_ptr(i);
    for (std::size_t j = 0; j < big; ++j) acc += row[j] * row[j];
    sigma[i] = std::sqrt(acc);
  }

  // Left factor of the tall orientation: columns are the orthogonalized
  // working rows divided by their norms. Exactly-zero columns get a
  // deterministic orthonormal completion (canonical basis vectors,
  // Gram-Schmidt against everything already placed) so the factor keeps
  // orthonormal columns even for rank-deficient input; the completed
  // directions multiply zero singular values, so the reconstruction is
  // unaffected.
  Matrix2D u_tall(big, k, 0.0);
  std::vector<std::size_t> zero_cols;
  for (std::size_t i = 0; i < k; ++i) {
    if (sigma[i] > 0.0) {
      const double* row = r.row_ptr(i);
      for (std::size_t j = 0; j < big; ++j) u_tall(j, i) = row[j] / sigma[i];
    } else {
      zero_cols.push_back(i);
    }
  }
  for (std::size_t col : zero_cols) {
    // Among all canonical basis vectors, keep the one whose residual
    // after projecting out the filled columns is largest. Unfilled
    // columns are all-zero and contribute nothing to the projection, so
    // it is safe to orthogonalize against every column of u_tall.
    std::vector<double> best_v;
    double best_norm = -1.0;
    for (std::size_t cand = 0; cand < big; ++cand) {
      std::vector<double> v(big, 0.0);
      v[cand] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t other = 0; other < k; ++other) {
          double dot = 0.0;
          for (std::size_t j = 0; j < big; ++j) dot += u_tall(j, other) * v[j];
          for (std::size_t j = 0; j < big; ++j) v[j] -= dot * u_tall(j, other);
        }
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > best_norm) {
        best_norm = norm;
        best_v = std::move(v);
      }
    }
    if (best_norm <= 0.0) {
      throw std::runtime_error("svd basis completion exhausted candidates");
    }
    for (std::size_t j = 0; j < big; ++j) u_tall(j, col) = best_v[j] / best_norm;
  }

  for (std::size_t i = 0; i < k; ++i) sigma[i] = std::ldexp(sigma[i], exp);

  // Map to the requested orientation:
  //   not transposed: m = u_tall * diag(sigma) * vt_acc
  //   transposed:     m = vt_acc^T * diag(sigma) * u_tall^T
  Matrix2D u = transposed ? transpose(vt_acc) : u_tall;
  Matrix2D vt = transposed ? transpose(u_tall) : vt_acc;

  // Stable descending sort of the singular values, with matching
  // permutation of u's columns and vt's rows.
  const std::vector<std::size_t> order = detail::descending_order(sigma);
  Matrix2D u_sorted(u.rows(), k, 0.0);
  Matrix2D vt_sorted(k, vt.cols(), 0.0);
  std::vector<double> sigma_sorted(k);
  for (std::size_t dst = 0; dst < k; ++dst) {
    const std::size_t src = order[dst];
    sigma_sorted[dst] = sigma[src];
    for (std::size_t i = 0; i < u.rows(); ++i) u_sorted(i, dst) = u(i, src);
    for (std::size_t j = 0; j < vt.cols(); ++j) vt_sorted(dst, j) = vt(src, j);
  }

  // Sign convention: in each column of u, the first entry of largest
  // magnitude is made nonnegative; the matching row of vt flips too, so
  // the product is unchanged.
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < u_sorted.rows(); ++i) {
      const double mag = std::fabs(u_sorted(i, col));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (u_sorted(arg, col) < 0.0) {
      for (std::size_t i = 0; i < u_sorted.rows(); ++i) u_sorted(i, col) = -u_sorted(i, col);
      for (std::size_t j = 0; j < vt_sorted.cols(); ++j) vt_sorted(col, j) = -vt_sorted(col, j);
    }
  }

  return SvdFactors{std::move(u_sorted), std::move(sigma_sorted), std::move(vt_sorted)};
}

// Nearest matrix with orthonormal rows or columns: u * vt from the thin
// decomposition. For full-rank input this is the classical orthogonal
// polar factor.
inline Matrix2D polar_orthogonal(const Matrix2D& m) {
  const SvdFactors f = thin_svd(m);
  return multiply(f.u, f.vt);
}

}  // namespace condaopt
