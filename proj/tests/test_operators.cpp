#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/operators.hpp"

using namespace otoc;

namespace {

Matrix pauli_x() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}

Matrix pauli_z() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(PauliString, IdentityStringIsIdentityMatrix) {
  const auto op = pauli_string_matrix(PauliString::parse("00"), 2);
  EXPECT_EQ(max_abs(op.entries() - Matrix::Identity(4, 4)), 0.0);
}

TEST(PauliString, SingleSigmaX) {
  const auto op = pauli_string_matrix(PauliString::parse("x"), 1);
  EXPECT_EQ(max_abs(op.entries() - pauli_x()), 0.0);
}

TEST(PauliString, ZZIsDiagonal) {
  const auto op = pauli_string_matrix(PauliString::parse("zz"), 2);
  Matrix expected = Matrix::Zero(4, 4);
  expected.diagonal() << 1.0, -1.0, -1.0, 1.0;
  EXPECT_EQ(max_abs(op.entries() - expected), 0.0);
}

TEST(PauliString, FirstSiteIsMostSignificant) {
  const auto op = pauli_string_matrix(PauliString::parse("xz"), 2);
  EXPECT_EQ(max_abs(op.entries() - kron(pauli_x(), pauli_z())), 0.0);
}

TEST(PauliString, ParseAndSymbolsRoundTrip) {
  const auto p = PauliString::parse("0XyZi");
  EXPECT_EQ(p.sites(), 5);
  EXPECT_EQ(p.symbols(), "0xyz0");
  EXPECT_TRUE(PauliString::parse("000").is_identity());
  EXPECT_THROW(PauliString::parse("xq"), DomainError);
}

TEST(PauliString, OnlyIdentityHasTrace) {
  const char symbols[] = {'0', 'x', 'y', 'z'};
  for (char a : symbols) {
    for (char b : symbols) {
      const std::string text{a, b};
      const auto op = pauli_string_matrix(PauliString::parse(text, 2.5), 2);
      const Complex trace = op.entries().trace() / 4.0;
      if (text == "00") {
        EXPECT_NEAR(std::abs(trace - Complex(2.5)), 0.0, 1e-15);
      } else {
        EXPECT_EQ(std::abs(trace), 0.0) << text;
      }
    }
  }
}

TEST(PauliString, DistinctStringsAreOrthogonal) {
  const char symbols[] = {'0', 'x', 'y', 'z'};
  std::vector<DenseOperator> ops;
  for (char a : symbols) {
    for (char b : symbols) ops.push_back(pauli_string_matrix(PauliString::parse(std::string{a, b}), 2));
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    for (std::size_t j = 0; j < ops.size(); ++j) {
      const Complex dense = (ops[i].entries().adjoint() * ops[j].entries()).trace() / 4.0;
      EXPECT_NEAR(std::abs(dense - Complex(i == j ? 1.0 : 0.0)), 0.0, 1e-15);
      const Complex symbolic = normalized_trace_inner(ops[i].adjoint(), ops[j]);
      EXPECT_NEAR(std::abs(symbolic - dense), 0.0, 1e-15);
    }
  }
}

TEST(PauliString, ActionMatchesDenseProduct) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix in(16, 5);
  for (Eigen::Index i = 0; i < in.size(); ++i) in(i) = Complex(normal(rng), normal(rng));
  for (const char* text : {"xyz0", "0y0x", "zzzz", "yyyy"}) {
    const auto p = PauliString::parse(text, Complex(0.3, -1.2));
    Matrix out = Matrix::Zero(16, 5);
    accumulate_pauli_action(p, in, out);
    const Matrix dense = pauli_string_matrix(p, 4).entries() * in;
    EXPECT_LT(max_abs(out - dense), 1e-14) << text;
  }
}

TEST(SiteOperator, Examples) {
  EXPECT_EQ(max_abs(site_operator(PauliAxis::X, 1, 1).entries() - pauli_x()), 0.0);
  Matrix expected = Matrix::Zero(4, 4);
  expected.diagonal() << 1.0, -1.0, 1.0, -1.0;
  EXPECT_EQ(max_abs(site_operator(PauliAxis::Z, 2, 2).entries() - expected), 0.0);
  for (int site = 1; site <= 3; ++site) {
    for (auto axis : {PauliAxis::X, PauliAxis::Y, PauliAxis::Z}) {
      EXPECT_EQ(std::abs(site_operator(axis, site, 3).entries().trace()), 0.0);
    }
  }
  EXPECT_THROW(site_operator(PauliAxis::X, 4, 3), IndexError);
  EXPECT_THROW(site_operator(PauliAxis::I, 1, 3), DomainError);
  EXPECT_THROW(site_operator(PauliAxis::X, 1, 15), ResourceError);
}

TEST(DenseOperator, PauliSumsMaterializeLazily) {
  const auto op = DenseOperator::from_pauli({PauliString::parse("xz0")}, 3, "P");
  EXPECT_FALSE(op.is_materialized());
  EXPECT_TRUE(op.hermitian());
  EXPECT_EQ(op.entries().rows(), 8);
  EXPECT_TRUE(op.is_materialized());
  const auto skew = DenseOperator::from_pauli({PauliString::parse("xz0", Complex(0, 1))}, 3, "iP");
  EXPECT_FALSE(skew.hermitian());
  EXPECT_THROW(DenseOperator(Matrix::Zero(3, 3), "bad"), DimensionError);
}

TEST(TraceInner, Examples) {
  EXPECT_EQ(normalized_trace_inner(DenseOperator::identity(2), DenseOperator::identity(2)),
            Complex(1.0));
  const auto x1 = site_operator(PauliAxis::X, 1, 3);
  EXPECT_EQ(normalized_trace_inner(x1, x1), Complex(1.0));
  for (int n = 2; n <= 6; ++n) {
    const auto model = build_chain_hamiltonian(n, 0.1);
    const Complex overlap = normalized_trace_inner(model.total(), site_operator(PauliAxis::X, 1, n));
    EXPECT_NEAR(std::abs(overlap - Complex(-1.05)), 0.0, 1e-14) << n;
  }
  const auto model = build_chain_hamiltonian(3, 0.1);
  const Matrix dense_h = model.total().entries();
  const Complex brute = (dense_h * x1.entries()).trace() / 8.0;
  EXPECT_NEAR(std::abs(brute - Complex(-1.05)), 0.0, 1e-14);
}

TEST(Chain, LocalTermSquareMean) {
  const auto model = build_chain_hamiltonian(5, 0.1);
  EXPECT_DOUBLE_EQ(model.local_term_square_mean(), 2.3625);
  for (int i = 1; i <= 5; ++i) {
    const Complex square = normalized_trace_inner(model.local_term(i), model.local_term(i));
    EXPECT_NEAR(square.real(), 2.3625, 1e-12);
  }
}

TEST(Chain, TracelessAndOrthogonalTerms) {
  for (double g : {0.0, 0.1, 0.7}) {
    const auto model = build_chain_hamiltonian(5, g);
    const int d = 32;
    EXPECT_LT(std::abs(model.total().entries().trace()) / d, 1e-15);
    for (int j = 1; j <= 5; ++j) {
      const Matrix hj = model.local_term(j).entries();
      EXPECT_LT(std::abs(hj.trace()) / d, 1e-15);
      for (int k = j + 1; k <= 5; ++k) {
        const Complex cross = (hj * model.local_term(k).entries()).trace() / double(d);
        EXPECT_LT(std::abs(cross), 1e-14) << j << "," << k;
      }
    }
  }
}

TEST(Chain, SecondMomentIsExtensive) {
  for (int n = 3; n <= 7; ++n) {
    const auto model = build_chain_hamiltonian(n, 0.1);
    const Matrix h = model.total().entries();
    const double d = static_cast<double>(h.rows());
    const double h2 = (h * h).trace().real() / d;
    EXPECT_NEAR(h2 / (n * model.local_term_square_mean()), 1.0, 1e-10) << n;
  }
}

TEST(Chain, PeriodicBondCouplesLastAndFirstSite) {
  const auto terms = chain_local_term(5, 5, 0.1);
  bool has_zz = false;
  bool has_yz = false;
  for (const auto& t : terms) {
    has_zz = has_zz || t.symbols() == "z000z";
    has_yz = has_yz || t.symbols() == "z000y";
  }
  EXPECT_TRUE(has_zz);
  EXPECT_TRUE(has_yz);
}

TEST(Chain, TwoSitesWithoutCouplingMatchesHandBuiltMatrix) {
  const Matrix id = Matrix::Identity(2, 2);
  const Matrix zz = kron(pauli_z(), pauli_z());
  // Both bonds of the two-site ring join the same pair of sites.
  const Matrix expected = 2.0 * zz - 1.05 * (kron(pauli_x(), id) + kron(id, pauli_x())) +
                          0.5 * (kron(pauli_z(), id) + kron(id, pauli_z()));
  const auto model = build_chain_hamiltonian(2, 0.0);
  EXPECT_LT(max_abs(model.total().entries() - expected), 1e-15);
}

TEST(Chain, Hermitian) {
  const auto model = build_chain_hamiltonian(6, 0.1);
  const Matrix& h = model.total().entries();
  EXPECT_LE(max_abs(h - h.adjoint()), 1e-12 * max_abs(h));
  EXPECT_TRUE(model.total().hermitian());
  EXPECT_EQ(model.total().dim(), 64);
}

TEST(Chain, RejectsBadSizes) {
  EXPECT_THROW(build_chain_hamiltonian(1, 0.1), DomainError);
  EXPECT_THROW(build_chain_hamiltonian(15, 0.1), ResourceError);
  EXPECT_THROW(build_chain_hamiltonian(5, 0.1).local_term(6), IndexError);
}

TEST(Chain, OperatorCsvDump) {
  std::ostringstream out;
  write_operator_csv(out, site_operator(PauliAxis::X, 1, 1));
  EXPECT_EQ(out.str(), "# dim=2 label=sigmax_1\n0,1,1,0\n1,0,1,0\n");
}
