#pragma once
// Desk-scale differentiable objectives with closed-form gradients: a
// bilinear least-squares problem (controllable spectrum, the minimal
// setting where update-matrix conditioning is observable) and a small
// tanh MLP regression against a seeded teacher network. Both expose the
// same parameter-list interface the harness and the finite-difference
// checker drive.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace condaopt {

// A named view of one trainable tensor. Vector parameters (biases) are
// stored as n x 1 matrices; is_matrix distinguishes genuine 2D weights,
// which is what optimizer routing keys on.
struct ParamRef {
  std::string name;
  Matrix2D* value;
  bool is_matrix;
};

namespace detail {

// Z += b * ones^T: add a column vector to every column.
inline void add_column_broadcast(Matrix2D& z, const Matrix2D& b) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double* row = z.row_ptr(i);
    const double bi = b(i, 0);
    for (std::size_t j = 0; j < z.cols(); ++j) row[j] += bi;
  }
}

inline Matrix2D row_sums(const Matrix2D& m) {
  Matrix2D out(m.rows(), 1, 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j];
    out(i, 0) = acc;
  }
  return out;
}

}  // namespace detail

// --- Bilinear least squares: loss = 1/2 ||A W B - C||_F^2 -------------

class QuadraticProblem {
 public:
  QuadraticProblem(Matrix2D a, Matrix2D b, Matrix2D c, Matrix2D w0)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), w_(std::move(w0)) {
    if (a_.cols() != w_.rows() || w_.cols() != b_.rows() || c_.rows() != a_.rows() ||
        c_.cols() != b_.cols()) {
      throw std::invalid_argument("shape mismatch: quadratic problem factors disagree");
    }
  }

  std::vector<ParamRef> params() { return {{"w", &w_, true}}; }

  double loss() const { return 0.5 * squared_residual_norm(residual()); }

  // Shares one residual evaluation between the loss and the gradient:
  // grad = A^T (A W B - C) B^T.
  std::pair<double, std::vector<Matrix2D>> loss_and_gradients() const {
    const Matrix2D r = residual();
    Matrix2D grad = multiply_transpose_a(a_, multiply_transpose_b(r, b_));
    return {0.5 * squared_residual_norm(r), {std::move(grad)}};
  }

  const Matrix2D& a() const { return a_; }
  const Matrix2D& b() const { return b_; }
  const Matrix2D& weights() const { return w_; }

 private:
  Matrix2D residual() const {
    Matrix2D r = multiply(multiply(a_, w_), b_);
    r.add_scaled(c_, -1.0);
    return r;
  }

  static double squared_residual_norm(const Matrix2D& r) {
    const double n = frobenius_norm(r);
    return n * n;
  }

  Matrix2D a_, b_, c_;
  Matrix2D w_;
};

// Square m x m factor A with prescribed condition number kappa (built
// from seeded orthogonal factors around a geometric spectrum), identity
// B, and a consistent target C = A W* so the optimum has zero loss. The
// initial W is standard gaussian.
inline QuadraticProblem quadratic_with_condition(std::size_t m, std::size_t n, double kappa,
                                                 std::uint64_t seed) {
  if (!(kappa >= 1.0)) {
    throw std::invalid_argument("condition number must be at least 1");
  }
  Rng rng(seed);
  const Matrix2D a = random_with_spectrum(m, m, geometric_spectrum(m, 1.0 / kappa), rng);
  const Matrix2D w_star = random_gaussian(m, n, rng);
  const Matrix2D c = multiply(a, w_star);
  const Matrix2D w0 = random_gaussian(m, n, rng);
  return QuadraticProblem(a, Matrix2D::identity(n), c, w0);
}

// --- Teacher-student tanh MLP -----------------------------------------
//
// One hidden layer, column-major batch (each column one sample):
//   Z1 = W1 X + b1,  H = tanh(Z1),  Y = W2 H + b2,
//   loss = ||Y - T||_F^2 / batch.
// Targets come from a frozen teacher network with the same architecture
// plus gaussian observation noise, so the student's global optimum is
// near the teacher and exactly the teacher when the noise is zero.

class MlpProblem {
 public:
  MlpProblem(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
             std::size_t batch, double noise, std::uint64_t seed)
      : x_(1, 1), targets_(1, 1),  // reassigned below
        w1_(hidden_dim, input_dim, 0.0),
        w2_(output_dim, hidden_dim, 0.0),
        b1_(hidden_dim, 1, 0.0),
        b2_(output_dim, 1, 0.0),
        teacher_w1_(hidden_dim, input_dim, 0.0),
        teacher_w2_(output_dim, hidden_dim, 0.0),
        teacher_b1_(hidden_dim, 1, 0.0),
        teacher_b2_(output_dim, 1, 0.0) {
    if (input_dim == 0 || hidden_dim == 0 || output_dim == 0 || batch == 0) {
      throw std::invalid_argument("matrix dimensions must be positive");
    }
    if (noise < 0.0) throw std::invalid_argument("noise must be nonnegative");
    Rng rng(seed);

    // Teacher: 1/sqrt(fan_in)-scaled gaussian weights keep the hidden
    // preactivations at unit scale, well inside tanh's nonlinear range.
    teacher_w1_ = scaled_gaussian(hidden_dim, input_dim, rng);
    teacher_b1_ = small_gaussian(hidden_dim, rng);
    teacher_w2_ = scaled_gaussian(output_dim, hidden_dim, rng);
    teacher_b2_ = small_gaussian(output_dim, rng);

    x_ = random_gaussian(input_dim, batch, rng);
    targets_ = forward(teacher_w1_, teacher_b1_, teacher_w2_, teacher_b2_);
    if (noise > 0.0) {
      for (std::size_t i = 0; i < targets_.rows(); ++i)
        for (std::size_t j = 0; j < targets_.cols(); ++j)
          targets_(i, j) += noise * rng.normal();
    }

    // Student initialization from the same stream, independent of the
    // teacher's draw.
    w1_ = scaled_gaussian(hidden_dim, input_dim, rng);
    b1_ = small_gaussian(hidden_dim, rng);
    w2_ = scaled_gaussian(output_dim, hidden_dim, rng);
    b2_ = small_gaussian(output_dim, rng);
  }

  std::vector<ParamRef> params() {
    return {{"w1", &w1_, true}, {"b1", &b1_, false}, {"w2", &w2_, true}, {"b2", &b2_, false}};
  }

  // Test hook: copy the teacher's parameters into the student, putting
  // the loss at (noise-free) zero.
  void adopt_teacher() {
    w1_ = teacher_w1_;
    b1_ = teacher_b1_;
    w2_ = teacher_w2_;
    b2_ = teacher_b2_;
  }

  double loss() const {
    const Matrix2D y = forward(w1_, b1_, w2_, b2_);
    const double n = frobenius_norm_diff(y, targets_);
    return n * n / static_cast<double>(x_.cols());
  }

  std::pair<double, std::vector<Matrix2D>> loss_and_gradients() const {
    const std::size_t batch = x_.cols();
    // Forward, keeping the hidden activations for the backward pass.
    Matrix2D z1 = multiply(w1_, x_);
    detail::add_column_broadcast(z1, b1_);
    Matrix2D h = z1;
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = std::tanh(h.data()[i]);
    Matrix2D y = multiply(w2_, h);
    detail::add_column_broadcast(y, b2_);

    Matrix2D dy = y;  // residual, then scaled into dL/dY
    dy.add_scaled(targets_, -1.0);
    const double n = frobenius_norm(dy);
    const double loss = n * n / static_cast<double>(batch);
    dy.scale(2.0 / static_cast<double>(batch));

    Matrix2D g_w2 = multiply_transpose_b(dy, h);
    Matrix2D g_b2 = detail::row_sums(dy);
    Matrix2D dz1 = multiply_transpose_a(w2_, dy);
    for (std::size_t i = 0; i < dz1.size(); ++i) {
      const double hv = h.data()[i];
      dz1.data()[i] *= 1.0 - hv * hv;  // tanh' = 1 - tanh^2
    }
    Matrix2D g_w1 = multiply_transpose_b(dz1, x_);
    Matrix2D g_b1 = detail::row_sums(dz1);

    std::vector<Matrix2D> grads;
    grads.push_back(std::move(g_w1));
    grads.push_back(std::move(g_b1));
    grads.push_back(std::move(g_w2));
    grads.push_back(std::move(g_b2));
    return {loss, std::move(grads)};
  }

  const Matrix2D& inputs() const { return x_; }
  const Matrix2D& targets() const { return targets_; }

 private:
  static Matrix2D scaled_gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix2D m = random_gaussian(rows, cols, rng);
    m.scale(1.0 / std::sqrt(static_cast<double>(cols)));
    return m;
  }

  static Matrix2D small_gaussian(std::size_t n, Rng& rng) {
    Matrix2D m = random_gaussian(n, 1, rng);
    m.scale(0.1);
    return m;
  }

  Matrix2D forward(const Matrix2D& w1, const Matrix2D& b1, const Matrix2D& w2,
                   const Matrix2D& b2) const {
    Matrix2D z1 = multiply(w1, x_);
    detail::add_column_broadcast(z1, b1);
    for (std::size_t i = 0; i < z1.size(); ++i) z1.data()[i] = std::tanh(z1.data()[i]);
    Matrix2D y = multiply(w2, z1);
    detail::add_column_broadcast(y, b2);
    return y;
  }

  Matrix2D x_, targets_;
  Matrix2D w1_, w2_, b1_, b2_;
  Matrix2D teacher_w1_, teacher_w2_, teacher_b1_, teacher_b2_;
};

// --- Finite-difference gradient check ---------------------------------

// Central differences on every parameter entry. For each tensor the
// deviation is max|fd - analytic| normalized by max(max|analytic|,
// 1e-30); the worst tensor's value is returned. The probe mutates each
// entry in place and restores it, so the problem is left bit-identical.
template <typename Problem>
double finite_diff_check(Problem& problem, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const auto [loss, grads] = problem.loss_and_gradients();
  (void)loss;
  auto params = problem.params();
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix2D& value = *params[p].value;
    const Matrix2D& analytic = grads[p];
    double tensor_dev = 0.0;
    for (std::size_t i = 0; i < value.rows(); ++i) {
      for (std::size_t j = 0; j < value.cols(); ++j) {
        const double saved = value(i, j);
        value(i, j) = saved + h;
        const double up = problem.loss();
        value(i, j) = saved - h;
        const double down = problem.loss();
        value(i, j) = saved;
        const double fd = (up - down) / (2.0 * h);
        tensor_dev = std::max(tensor_dev, std::fabs(fd - analytic(i, j)));
      }
    }
    const double scale = std::max(max_abs(analytic), 1e-30);
    worst = std::max(worst, tensor_dev / scale);
  }
  return worst;
}

}  // namespace condaopt
