#pragma once
// Newton-Schulz orthogonalization: a fixed number of quintic iterations
// that drive the singular values of a matrix toward 1 while leaving its
// singular vectors alone, i.e. an inexpensive approximation of the
// orthogonal polar factor that needs only matrix products.
//
// Each iteration maps every singular value s through
//   f(s) = a*s + b*s^3 + c*s^5.
// The default coefficients are the classical quintic (the degree-5
// Pade-like expansion of the polar iteration); they converge
// monotonically from below for s in (0, 1], so iterating never
// overshoots 1. The "fast" triple trades that monotone convergence for
// a steeper early slope: it inflates tiny singular values much faster,
// but its fixed behavior is a narrow oscillation around 1 rather than
// convergence to it. Use it when direction quality after two or three
// iterations matters more than the limit.

#include <cmath>
#include <cstddef>

#include "matrix.hpp"

namespace condaopt {

struct NewtonSchulzCoeffs {
  double a;
  double b;
  double c;
};

// Classical convergent quintic: f(s) = (15 s - 10 s^3 + 3 s^5) / 8.
inline constexpr NewtonSchulzCoeffs kNewtonSchulzPolar{1.875, -1.25, 0.375};

// Aggressive triple with a steep slope at 0; oscillates near 1 instead
// of converging, holding singular values inside roughly [0.7, 1.15].
inline constexpr NewtonSchulzCoeffs kNewtonSchulzFast{3.4445, -4.7750, 2.0315};

// Runs `steps` quintic iterations on m. The input is first scaled by
// its Frobenius norm so every singular value lands in (0, 1], the
// region where the iteration is well behaved. The Gram matrix X*X^T is
// always formed on the smaller side (the input is transposed when it
// has more rows than columns), which keeps the cost at
// O(min^2 * max) per iteration. A zero matrix maps to zero.
inline Matrix2D newton_schulz5(const Matrix2D& m, std::size_t steps,
                               const NewtonSchulzCoeffs& coeffs = kNewtonSchulzPolar) {
  const double norm = frobenius_norm(m);
  if (norm == 0.0) return Matrix2D(m.rows(), m.cols(), 0.0);

  const bool transposed = m.rows() > m.cols();
  Matrix2D x = transposed ? transpose(m) : m;
  x.scale(1.0 / (norm + 1e-7));

  for (std::size_t step = 0; step < steps; ++step) {
    const Matrix2D a = multiply_transpose_b(x, x);       // X X^T, small side squared
    Matrix2D b = multiply(a, a);                         // (X X^T)^2
    b.scale(coeffs.c);
    b.add_scaled(a, coeffs.b);                           // b*A + c*A^2
    Matrix2D next = multiply(b, x);
    next.add_scaled(x, coeffs.a);                        // a*X + (b*A + c*A^2)*X
    x = std::move(next);
  }

  return transposed ? transpose(x) : x;
}

}  // namespace condaopt
