#include <gtest/gtest.h>

#include <random>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/linalg.hpp"

using namespace otoc;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = Complex(normal(rng), normal(rng));
  return m;
}

// Textbook triple loop, independent of any BLAS.
Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const Complex bkj = b(k, j);
      for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, j) += a(i, k) * bkj;
    }
  }
  return out;
}

}  // namespace

// Sizes of 256 and above take the optimized kernels where a miscompiled or
// misdetected BLAS would show up.
TEST(Multiply, AgreesWithNaiveProductAtLargeSize) {
  const Matrix a = random_matrix(512, 512, 1);
  const Matrix b = random_matrix(512, 512, 2);
  const Matrix expected = naive_product(a, b);
  const double scale = expected.cwiseAbs().maxCoeff();
  EXPECT_LT((multiply(a, b) - expected).cwiseAbs().maxCoeff(), 1e-12 * scale);
  const Matrix ah = a.adjoint();
  const Matrix bh = b.adjoint();
  EXPECT_LT((multiply(ah, Op::adjoint, b, Op::none) - expected).cwiseAbs().maxCoeff(), 1e-12 * scale);
  EXPECT_LT((multiply(a, Op::none, bh, Op::adjoint) - expected).cwiseAbs().maxCoeff(), 1e-12 * scale);
  EXPECT_LT((multiply(ah, Op::adjoint, bh, Op::adjoint) - expected).cwiseAbs().maxCoeff(),
            1e-12 * scale);
}

TEST(Multiply, RectangularShapes) {
  const Matrix a = random_matrix(7, 3, 3);
  const Matrix b = random_matrix(3, 5, 4);
  EXPECT_LT((multiply(a, b) - naive_product(a, b)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_THROW(multiply(a, a), DimensionError);
}

TEST(Multiply, RejectsAliasedOutput) {
  Matrix a = random_matrix(4, 4, 5);
  const Matrix b = random_matrix(4, 4, 6);
  EXPECT_THROW(multiply_into(a, a, Op::none, b, Op::none), ContractError);
}
