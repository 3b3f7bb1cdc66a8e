// Objective functions: closed-form losses and gradients against the
// finite-difference oracle, the prescribed-condition constructor, and
// the descent property of exact gradient descent.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "condaopt/matrix.hpp"
#include "condaopt/models.hpp"
#include "condaopt/rng.hpp"
#include "condaopt/spectral.hpp"

using namespace condaopt;

TEST_CASE("identity quadratic instance", "[models]") {
  // A = B = I, C = 0: loss = 1/2 ||W||_F^2 and grad = W.
  Rng rng(2);
  const Matrix2D w0 = random_gaussian(3, 4, rng);
  QuadraticProblem prob(Matrix2D::identity(3), Matrix2D::identity(4), Matrix2D(3, 4, 0.0), w0);
  const auto [loss, grads] = prob.loss_and_gradients();
  const double fro = frobenius_norm(w0);
  REQUIRE(loss == Catch::Approx(0.5 * fro * fro).epsilon(1e-14));
  REQUIRE(max_abs_diff(grads[0], w0) <= 1e-14);
  REQUIRE(prob.loss() == loss);
}

TEST_CASE("quadratic optimum has zero loss and gradient", "[models]") {
  Rng rng(14);
  const Matrix2D a = random_gaussian(4, 3, rng);
  const Matrix2D b = random_gaussian(5, 4, rng);
  const Matrix2D w_star = random_gaussian(3, 5, rng);
  const Matrix2D c = multiply(multiply(a, w_star), b);
  QuadraticProblem prob(a, b, c, w_star);
  const auto [loss, grads] = prob.loss_and_gradients();
  REQUIRE(loss <= 1e-24);
  REQUIRE(max_abs(grads[0]) <= 1e-12);
}

TEST_CASE("quadratic shape mismatches are rejected", "[models]") {
  REQUIRE_THROWS_AS(QuadraticProblem(Matrix2D::identity(3), Matrix2D::identity(4),
                                     Matrix2D(3, 4, 0.0), Matrix2D(4, 4, 0.0)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(QuadraticProblem(Matrix2D::identity(3), Matrix2D::identity(4),
                                     Matrix2D(4, 4, 0.0), Matrix2D(3, 4, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("quadratic gradient matches finite differences", "[models]") {
  Rng rng(13);
  const Matrix2D a = random_gaussian(5, 4, rng);
  const Matrix2D b = random_gaussian(3, 5, rng);
  const Matrix2D c = random_gaussian(5, 5, rng);
  QuadraticProblem prob(a, b, c, random_gaussian(4, 3, rng));
  REQUIRE(finite_diff_check(prob, 1e-6) <= 1e-7);
}

TEST_CASE("prescribed condition number is hit", "[models]") {
  for (double kappa : {1.0, 10.0, 1e3}) {
    QuadraticProblem prob = quadratic_with_condition(16, 16, kappa, 7);
    REQUIRE(condition_number(prob.a()) == Catch::Approx(kappa).epsilon(1e-6));
  }
  QuadraticProblem rect = quadratic_with_condition(8, 12, 100.0, 9);
  REQUIRE(condition_number(rect.a()) == Catch::Approx(100.0).epsilon(1e-6));
  REQUIRE(rect.weights().rows() == 8);
  REQUIRE(rect.weights().cols() == 12);
  REQUIRE_THROWS_AS(quadratic_with_condition(4, 4, 0.5, 1), std::invalid_argument);
}

TEST_CASE("prescribed-condition instance reaches zero loss", "[models]") {
  // C is built as A W*, so the optimum exists and has loss zero; plain
  // gradient descent with a safe step must find it. The slowest mode
  // contracts like (1 - eta/kappa^2)^2 per step, so 5000 steps at
  // kappa = 10 land far below the threshold.
  QuadraticProblem prob = quadratic_with_condition(6, 6, 10.0, 21);
  const double sigma_max = singular_spectrum(prob.a()).front();
  const double eta = 0.9 / (sigma_max * sigma_max);
  auto params = prob.params();
  for (int t = 0; t < 5000; ++t) {
    const auto [loss, grads] = prob.loss_and_gradients();
    params[0].value->add_scaled(grads[0], -eta);
  }
  REQUIRE(prob.loss() <= 1e-12);
}

TEST_CASE("gradient descent below the curvature limit never increases the loss", "[models]") {
  Rng rng(99);
  const Matrix2D a = random_gaussian(6, 5, rng);
  const Matrix2D b = random_gaussian(4, 6, rng);
  const Matrix2D c = random_gaussian(6, 6, rng);
  QuadraticProblem prob(a, b, c, random_gaussian(5, 4, rng));
  const double la = singular_spectrum(a).front();
  const double lb = singular_spectrum(b).front();
  const double eta = 0.99 / (la * la * lb * lb);
  auto params = prob.params();
  double prev = prob.loss();
  for (int t = 0; t < 100; ++t) {
    const auto [loss, grads] = prob.loss_and_gradients();
    params[0].value->add_scaled(grads[0], -eta);
    const double cur = prob.loss();
    REQUIRE(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("mlp dead network loss equals the target mean square", "[models]") {
  // Zero weights and biases produce zero outputs, so the loss is
  // ||T||_F^2 / batch.
  MlpProblem prob(4, 6, 3, 32, 0.0, 5);
  for (auto& p : prob.params()) p.value->fill(0.0);
  const double target_norm = frobenius_norm(prob.targets());
  REQUIRE(prob.loss() == Catch::Approx(target_norm * target_norm / 32.0).epsilon(1e-14));
}

TEST_CASE("mlp teacher parameters interpolate noise-free targets", "[models]") {
  MlpProblem prob(8, 12, 5, 64, 0.0, 31);
  REQUIRE(prob.loss() > 1e-6);  // student starts away from the teacher
  prob.adopt_teacher();
  REQUIRE(prob.loss() <= 1e-20);
}

TEST_CASE("mlp loss accessor agrees with the gradient path", "[models]") {
  MlpProblem prob(6, 10, 4, 48, 0.01, 77);
  const auto [loss, grads] = prob.loss_and_gradients();
  REQUIRE(loss == Catch::Approx(prob.loss()).epsilon(1e-15));
  REQUIRE(grads.size() == 4);
  REQUIRE(grads[0].rows() == 10);  // w1: hidden x input
  REQUIRE(grads[0].cols() == 6);
  REQUIRE(grads[1].cols() == 1);   // b1 column
  REQUIRE(grads[2].rows() == 4);   // w2: output x hidden
  REQUIRE(grads[3].rows() == 4);   // b2
}

TEST_CASE("mlp gradients match finite differences", "[models]") {
  MlpProblem prob(5, 8, 3, 24, 0.01, 13);
  REQUIRE(finite_diff_check(prob, 1e-6) <= 1e-5);
}

TEST_CASE("finite differences leave the problem untouched", "[models]") {
  MlpProblem prob(4, 6, 2, 16, 0.01, 8);
  const double before = prob.loss();
  finite_diff_check(prob, 1e-6);
  REQUIRE(prob.loss() == before);
}

TEST_CASE("coarser steps lose accuracy on a curved objective", "[models]") {
  // tanh has nonvanishing higher derivatives, so the truncation error
  // of central differences grows with h^2 and dominates at h = 1e-2.
  // (On the quadratic the truncation term is exactly zero and only
  // rounding noise remains, so this direction is tested here.)
  MlpProblem prob(5, 8, 3, 24, 0.01, 13);
  const double fine = finite_diff_check(prob, 1e-6);
  const double coarse = finite_diff_check(prob, 1e-2);
  REQUIRE(coarse > fine);
}

TEST_CASE("parameter routing metadata distinguishes matrices from vectors", "[models]") {
  MlpProblem prob(4, 6, 3, 16, 0.0, 3);
  auto params = prob.params();
  REQUIRE(params.size() == 4);
  REQUIRE(params[0].name == "w1");
  REQUIRE(params[0].is_matrix);
  REQUIRE_FALSE(params[1].is_matrix);
  REQUIRE(params[2].is_matrix);
  REQUIRE_FALSE(params[3].is_matrix);

  QuadraticProblem quad = quadratic_with_condition(4, 4, 10.0, 1);
  auto qp = quad.params();
  REQUIRE(qp.size() == 1);
  REQUIRE(qp[0].is_matrix);
}

TEST_CASE("problems evaluate deterministically", "[models]") {
  MlpProblem p1(6, 9, 4, 32, 0.01, 123);
  MlpProblem p2(6, 9, 4, 32, 0.01, 123);
  REQUIRE(p1.loss() == p2.loss());
  const auto g1 = p1.loss_and_gradients();
  const auto g2 = p2.loss_and_gradients();
  for (std::size_t i = 0; i < g1.second.size(); ++i)
    REQUIRE(max_abs_diff(g1.second[i], g2.second[i]) == 0.0);
}
