// Singular spectrum and condition number diagnostics.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "condaopt/matrix.hpp"
#include "condaopt/rng.hpp"
#include "condaopt/spectral.hpp"
#include "condaopt/svd.hpp"

using namespace condaopt;

TEST_CASE("identity has unit spectrum and condition 1", "[spectral]") {
  const Matrix2D eye = Matrix2D::identity(4);
  const std::vector<double> sigma = singular_spectrum(eye);
  for (double s : sigma) CHECK(s == Catch::Approx(1.0).margin(1e-14));
  CHECK(condition_number(eye) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("diagonal spectrum is read off directly", "[spectral]") {
  const Matrix2D d = Matrix2D::from({{10.0, 0.0}, {0.0, 0.1}});
  const std::vector<double> sigma = singular_spectrum(d);
  CHECK(sigma[0] == 10.0);
  CHECK(sigma[1] == 0.1);
  CHECK(std::log(condition_number(d)) == Catch::Approx(std::log(100.0)).epsilon(1e-12));
}

TEST_CASE("numerically zero values are excluded from the condition number", "[spectral]") {
  // Rank-one and exactly rank-deficient matrices: the smallest counted
  // singular value is the smallest one above rank_tol * sigma_max, so a
  // rank-one matrix is perfectly conditioned on its range.
  const Matrix2D u = Matrix2D::from({{2.0}, {1.0}});
  const Matrix2D v = Matrix2D::from({{1.0, -1.0, 3.0}});
  const Matrix2D rank1 = multiply(u, v);
  CHECK(condition_number(rank1) == Catch::Approx(1.0).margin(1e-10));

  const Matrix2D d = Matrix2D::from({{3.0, 0.0}, {0.0, 0.0}});
  CHECK(condition_number(d) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("rank tolerance is adjustable", "[spectral]") {
  const Matrix2D d = Matrix2D::from({{1.0, 0.0}, {0.0, 1e-6}});
  CHECK(condition_number(d) == Catch::Approx(1e6).epsilon(1e-10));
  CHECK(condition_number(d, 1e-3) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("condition number is scale invariant", "[spectral]") {
  Rng rng(23);
  const Matrix2D a = random_gaussian(5, 5, rng);
  Matrix2D tiny = a;
  tiny.scale(1e-8);
  const double ca = condition_number(a);
  const double ct = condition_number(tiny);
  CHECK(ct == Catch::Approx(ca).epsilon(1e-10));
}

TEST_CASE("zero matrix reports infinite condition", "[spectral]") {
  const Matrix2D z(3, 3);
  CHECK(std::isinf(condition_number(z)));
}

TEST_CASE("spectrum agrees with the full decomposition bit for bit", "[spectral]") {
  // The values-only path performs exactly the same rotations as the
  // full decomposition, so both must produce identical doubles.
  Rng rng(8);
  for (const auto& shape : {std::pair<std::size_t, std::size_t>{6, 3},
                            std::pair<std::size_t, std::size_t>{3, 6},
                            std::pair<std::size_t, std::size_t>{5, 5}}) {
    const Matrix2D a = random_gaussian(shape.first, shape.second, rng);
    const std::vector<double> fast = singular_spectrum(a);
    const SvdFactors f = thin_svd(a);
    REQUIRE(fast.size() == f.sigma.size());
    for (std::size_t i = 0; i < fast.size(); ++i) REQUIRE(fast[i] == f.sigma[i]);
  }
}

TEST_CASE("spectrum scales linearly", "[spectral]") {
  Rng rng(16);
  const Matrix2D a = random_gaussian(4, 6, rng);
  Matrix2D scaled = a;
  scaled.scale(1e-8);
  const std::vector<double> sa = singular_spectrum(a);
  const std::vector<double> ss = singular_spectrum(scaled);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(ss[i] == Catch::Approx(1e-8 * sa[i]).epsilon(1e-10));
  }
}

TEST_CASE("non-finite input is rejected", "[spectral]") {
  Matrix2D a(2, 2, 0.0);
  a(0, 0) = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_WITH(singular_spectrum(a), "non-finite matrix");
}
