#include <gtest/gtest.h>

#include <random>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/haar.hpp"

using namespace otoc;

namespace {

Matrix sigma_x() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}

}  // namespace

TEST(HaarUnitary, IsUnitary) {
  std::mt19937_64 rng(1);
  for (int dim : {2, 3, 8, 17}) {
    for (int k = 0; k < 20; ++k) {
      const Matrix u = sample_haar_unitary(dim, rng);
      EXPECT_LE((u.adjoint() * u - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  EXPECT_THROW(sample_haar_unitary(0, rng), DomainError);
}

TEST(HaarUnitary, FirstMomentOfAnEntry) {
  std::mt19937_64 rng(2);
  constexpr int kSamples = 100000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int k = 0; k < kSamples; ++k) {
    const double v = std::norm(sample_haar_unitary(2, rng)(0, 0));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / kSamples;
  const double se = std::sqrt((sum_sq / kSamples - mean * mean) / (kSamples - 1));
  EXPECT_LE(std::abs(mean - 0.5), 3.0 * se);
}

TEST(HaarUnitary, SeedFixesTheSequence) {
  std::mt19937_64 a(9);
  std::mt19937_64 b(9);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(sample_haar_unitary(4, a), sample_haar_unitary(4, b));
}

TEST(HaarClosedForm, Examples) {
  const Matrix id = Matrix::Identity(2, 2);
  EXPECT_EQ(haar_otoc_closed_form(id, id, id, id), Complex(1.0));
  const Matrix x = sigma_x();
  EXPECT_NEAR(std::abs(haar_otoc_closed_form(x, x, x, x) - Complex(-1.0 / 3.0)), 0.0, 1e-15);
  EXPECT_THROW(haar_otoc_closed_form(x, x, x, Matrix::Identity(4, 4)), DimensionError);
}

TEST(HaarClosedForm, TracelessPaulisAreExponentiallySmall) {
  // For traceless Paulis only the connected term survives: -1 / (d^2 - 1).
  for (int qubits = 1; qubits <= 5; ++qubits) {
    const int d = 1 << qubits;
    Matrix x = sigma_x();
    for (int k = 1; k < qubits; ++k) {
      Matrix bigger = Matrix::Zero(2 * x.rows(), 2 * x.cols());
      bigger.topLeftCorner(x.rows(), x.cols()) = x;
      bigger.bottomRightCorner(x.rows(), x.cols()) = x;
      x = bigger;
    }
    const double bound = 1.0 / (double(d) * d - 1.0);
    EXPECT_NEAR(std::abs(haar_otoc_closed_form(x, x, x, x)), bound, 1e-15);
  }
}

TEST(HaarMonteCarlo, SigmaXPreset) {
  const Matrix x = sigma_x();
  const auto estimate = haar_otoc_monte_carlo(x, x, x, x, 100000, 7);
  EXPECT_LE(std::abs(estimate.mc_value - Complex(-1.0 / 3.0)), 3.0 * estimate.mc_std_error);
  EXPECT_EQ(estimate.dim, 2);
  EXPECT_EQ(estimate.seed, 7u);
  EXPECT_EQ(estimate.samples, 100000);
}

TEST(HaarMonteCarlo, RandomTracelessQuadruple) {
  std::mt19937_64 rng(5);
  const Matrix a = random_traceless_hermitian(8, rng);
  const Matrix b = random_traceless_hermitian(8, rng);
  const Matrix c = random_traceless_hermitian(8, rng);
  const Matrix d = random_traceless_hermitian(8, rng);
  EXPECT_LT(std::abs(a.trace()), 1e-13);
  EXPECT_NEAR((a * a).trace().real() / 8.0, 1.0, 1e-13);
  const auto estimate = haar_otoc_monte_carlo(a, b, c, d, 10000, 13);
  EXPECT_LE(std::abs(estimate.mc_value - estimate.closed_form), 3.0 * estimate.mc_std_error);
}

TEST(HaarMonteCarlo, IdentityIsExact) {
  const Matrix id = Matrix::Identity(4, 4);
  const auto estimate = haar_otoc_monte_carlo(id, id, id, id, 50, 3);
  EXPECT_EQ(estimate.mc_value, Complex(1.0));
  EXPECT_EQ(estimate.mc_std_error, 0.0);
}

TEST(HaarMonteCarlo, ThreadCountDoesNotChangeResults) {
  std::mt19937_64 rng(8);
  const Matrix a = random_traceless_hermitian(4, rng);
  const Matrix b = random_traceless_hermitian(4, rng);
  const auto serial = haar_otoc_monte_carlo(a, b, a, b, 3000, 21, 1);
  const auto threaded = haar_otoc_monte_carlo(a, b, a, b, 3000, 21, 4);
  EXPECT_EQ(serial.mc_value, threaded.mc_value);
  EXPECT_EQ(serial.mc_std_error, threaded.mc_std_error);
}

TEST(HaarMonteCarlo, RejectsBadInput) {
  const Matrix x = sigma_x();
  EXPECT_THROW(haar_otoc_monte_carlo(x, x, x, x, 1, 0), DomainError);
  EXPECT_THROW(haar_otoc_monte_carlo(x, x, x, Matrix::Identity(3, 3), 10, 0), DimensionError);
}
