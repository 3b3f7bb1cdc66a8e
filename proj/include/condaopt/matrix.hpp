#pragma once
// Dense row-major matrix of double with the handful of operations the
// optimizers, models, and diagnostics need. Dimensions are fixed at
// construction and every operation is deterministic: identical inputs
// produce bit-identical outputs.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace condaopt {

class Matrix2D {
 public:
  Matrix2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw std::invalid_argument("matrix dimensions must be positive");
    }
  }

  // Row-wise literal, handy for hand-computed expectations in tests:
  //   Matrix2D::from({{1.0, 2.0}, {3.0, 4.0}})
  static Matrix2D from(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0 || rows.begin()->size() == 0) {
      throw std::invalid_argument("matrix dimensions must be positive");
    }
    Matrix2D out(rows.size(), rows.begin()->size());
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != out.cols_) {
        throw std::invalid_argument("shape mismatch: ragged row in matrix literal");
      }
      std::size_t j = 0;
      for (double v : row) out(i, j++) = v;
      ++i;
    }
    return out;
  }

  static Matrix2D identity(std::size_t n) {
    Matrix2D out(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  void scale(double s) {
    for (double& v : data_) v *= s;
  }

  // this += s * other
  void add_scaled(const Matrix2D& other, double s) {
    if (other.rows_ != rows_ || other.cols_ != cols_) {
      throw std::invalid_argument("shape mismatch: add_scaled operands differ");
    }
    const double* src = other.data();
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * src[i];
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

inline bool same_shape(const Matrix2D& a, const Matrix2D& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

inline Matrix2D transpose(const Matrix2D& m) {
  Matrix2D out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  }
  return out;
}

// c = a * b
inline Matrix2D multiply(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("shape mismatch: multiply inner dimensions differ");
  }
  Matrix2D out(a.rows(), b.cols(), 0.0);
  const std::size_t inner = a.cols(), width = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      const double* brow = b.row_ptr(k);
      for (std::size_t j = 0; j < width; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

// c = a^T * b
inline Matrix2D multiply_transpose_a(const Matrix2D& a, const Matrix2D& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("shape mismatch: multiply_transpose_a inner dimensions differ");
  }
  Matrix2D out(a.cols(), b.cols(), 0.0);
  const std::size_t inner = a.rows(), width = b.cols();
  for (std::size_t k = 0; k < inner; ++k) {
    const double* arow = a.row_ptr(k);
    const double* brow = b.row_ptr(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      double* orow = out.row_ptr(i);
      for (std::size_t j = 0; j < width; ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

// c = a * b^T
inline Matrix2D multiply_transpose_b(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("shape mismatch: multiply_transpose_b inner dimensions differ");
  }
  Matrix2D out(a.rows(), b.rows(), 0.0);
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += arow[k] * brow[k];
      orow[j] = acc;
    }
  }
  return out;
}

inline double frobenius_norm(const Matrix2D& m) {
  double acc = 0.0;
  const double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) acc += p[i] * p[i];
  return std::sqrt(acc);
}

inline double max_abs(const Matrix2D& m) {
  double best = 0.0;
  const double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) best = std::max(best, std::fabs(p[i]));
  return best;
}

inline double max_abs_diff(const Matrix2D& a, const Matrix2D& b) {
  if (!same_shape(a, b)) {
    throw std::invalid_argument("shape mismatch: max_abs_diff operands differ");
  }
  double best = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::fabs(pa[i] - pb[i]));
  return best;
}

inline double frobenius_norm_diff(const Matrix2D& a, const Matrix2D& b) {
  if (!same_shape(a, b)) {
    throw std::invalid_argument("shape mismatch: frobenius_norm_diff operands differ");
  }
  double acc = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline bool is_finite(const Matrix2D& m) {
  const double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

}  // namespace condaopt
