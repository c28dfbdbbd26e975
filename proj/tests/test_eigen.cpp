#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fracext/eigen.hpp"
#include "fracext/random.hpp"

using namespace fracext;

namespace {

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = rng.normal();
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

}  // namespace

TEST(SymmetricEigen, TwoByTwo) {
  Matrix a(2, 2);
  a(0, 0) = 2;
  a(0, 1) = 1;
  a(1, 0) = 1;
  a(1, 1) = 2;
  const auto eig = symmetric_eigen(a);
  EXPECT_NEAR(eig.values[0], 1.0, 1e-14);
  EXPECT_NEAR(eig.values[1], 3.0, 1e-14);
  EXPECT_NEAR(eig.values[0] + eig.values[1], 4.0, 1e-14);
  // Sign convention: first non-negligible entry positive.
  EXPECT_GT(eig.vectors(0, 0), 0.0);
  EXPECT_GT(eig.vectors(1, 0), 0.0);
}

TEST(SymmetricEigen, PathLaplacianClosedForm) {
  const std::size_t n = 9;
  Matrix a(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    a(i, i) += 1;
    a(i + 1, i + 1) += 1;
    a(i, i + 1) -= 1;
    a(i + 1, i) -= 1;
  }
  const auto eig = symmetric_eigen(a, false);
  for (std::size_t k = 0; k < n; ++k)
    EXPECT_NEAR(eig.values[k], 2.0 - 2.0 * std::cos(k * std::numbers::pi / n), 1e-13);
}

TEST(SymmetricEigen, RandomMatricesReconstruct) {
  for (std::size_t n : {1u, 3u, 17u, 60u}) {
    const Matrix a = random_symmetric(n, 42 + n);
    const auto eig = symmetric_eigen(a);
    for (std::size_t i = 1; i < n; ++i) EXPECT_LE(eig.values[i - 1], eig.values[i]);
    double scale = 0.0;
    for (double v : a.storage()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i) {
      const Vector av = matvec(a, eig.vectors.row(i));
      for (std::size_t k = 0; k < n; ++k)
        EXPECT_NEAR(av[k], eig.values[i] * eig.vectors(i, k), 1e-11 * scale * n);
      for (std::size_t j = 0; j < n; ++j)
        EXPECT_NEAR(dot(eig.vectors.row(i), eig.vectors.row(j)), i == j ? 1.0 : 0.0, 1e-12 * n);
    }
    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      trace += a(i, i);
      sum += eig.values[i];
    }
    EXPECT_NEAR(trace, sum, 1e-11 * scale * n);
  }
}

TEST(SymmetricEigen, ValuesOnlyAgreesWithFull) {
  const Matrix a = random_symmetric(40, 5);
  const auto full = symmetric_eigen(a, true);
  const auto vals = symmetric_eigen(a, false);
  ASSERT_TRUE(vals.vectors.storage().empty());
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(full.values[i], vals.values[i], 1e-12);
}

TEST(SymmetricEigen, DiagonalAndRepeated) {
  Matrix a = Matrix::identity(5);
  a(2, 2) = -3.0;
  const auto eig = symmetric_eigen(a);
  EXPECT_DOUBLE_EQ(eig.values[0], -3.0);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_DOUBLE_EQ(eig.values[i], 1.0);
}

TEST(SymmetricEigen, SweepLimitReported) {
  const Matrix a = random_symmetric(30, 9);
  EXPECT_THROW(symmetric_eigen(a, true, 0), NumericalFailure);
}

TEST(SymmetricEigen, RejectsNonSquare) { EXPECT_THROW(symmetric_eigen(Matrix(2, 3)), InvalidArgument); }
