#include <gtest/gtest.h>

#include <vector>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/reference.hpp"
#include "otoc_lab/spectral.hpp"

using namespace otoc;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Diagonalize, SigmaZ) {
  const auto spectral = diagonalize(site_operator(PauliAxis::Z, 1, 1));
  ASSERT_EQ(spectral.dim(), 2);
  EXPECT_NEAR(spectral.energies()(0), -1.0, 1e-15);
  EXPECT_NEAR(spectral.energies()(1), 1.0, 1e-15);
}

TEST(Diagonalize, TwoSiteChainMatchesIndependentSolver) {
  const auto model = build_chain_hamiltonian(2, 0.0);
  const auto spectral = diagonalize(model);
  Eigen::SelfAdjointEigenSolver<Matrix> oracle(model.total().entries());
  EXPECT_LT((spectral.energies() - oracle.eigenvalues()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Diagonalize, DecompositionInvariants) {
  for (int n : {3, 6, 8}) {
    const auto model = build_chain_hamiltonian(n, 0.1);
    const auto spectral = diagonalize(model);
    const Eigen::VectorXd& e = spectral.energies();
    const Matrix& v = spectral.eigenvectors();
    const Matrix& h = model.total().entries();
    for (Eigen::Index j = 1; j < e.size(); ++j) EXPECT_LE(e(j - 1), e(j));
    const auto d = v.rows();
    EXPECT_LE(max_abs(v.adjoint() * v - Matrix::Identity(d, d)), 1e-10);
    EXPECT_LE(max_abs(v * e.cast<Complex>().asDiagonal() * v.adjoint() - h), 1e-9 * max_abs(h));
    EXPECT_LE(std::abs(e.sum()), 1e-9 * static_cast<double>(d));
    EXPECT_LE(decomposition_residual(model.total(), spectral), kDecompositionTolerance);
  }
}

TEST(Diagonalize, RefusesNonHermitianAndOversizedInput) {
  const auto skew = DenseOperator::from_pauli({PauliString::parse("x", Complex(0, 1))}, 1, "ix");
  EXPECT_THROW(diagonalize(skew), ContractError);
  EXPECT_THROW(diagonalize(build_chain_hamiltonian(6, 0.1), 5), ResourceError);
}

TEST(EnergyBasis, HamiltonianBecomesDiagonal) {
  const auto model = build_chain_hamiltonian(6, 0.1);
  const auto spectral = diagonalize(model);
  const auto h = to_energy_basis(model.total(), spectral);
  const Matrix expected = spectral.energies().cast<Complex>().asDiagonal();
  EXPECT_LT(max_abs(h.entries - expected), 1e-9);
  const auto dense = to_energy_basis(DenseOperator(model.total().entries(), "H dense"), spectral);
  EXPECT_LT(max_abs(dense.entries - expected), 1e-9);
}

TEST(EnergyBasis, IdentityStaysIdentity) {
  const auto spectral = diagonalize(build_chain_hamiltonian(5, 0.1));
  const auto id = to_energy_basis(DenseOperator::identity(5), spectral);
  EXPECT_LT(max_abs(id.entries - Matrix::Identity(32, 32)), 1e-12);
}

TEST(EnergyBasis, TraceIsInvariant) {
  const auto spectral = diagonalize(build_chain_hamiltonian(2, 0.1));
  const auto x = to_energy_basis(site_operator(PauliAxis::X, 1, 2), spectral);
  EXPECT_LT(std::abs(x.entries.trace()), 1e-10);
}

TEST(EnergyBasis, RoundTripAndDiagonalShortcut) {
  const auto model = build_chain_hamiltonian(5, 0.1);
  const auto spectral = diagonalize(model);
  const auto& terms = model.local_term(2).pauli_expansion();
  const auto op = to_energy_basis(terms, spectral, "H_2");
  EXPECT_LT(max_abs(op.to_computational_basis(spectral) - model.local_term(2).entries()), 1e-12);
  const Eigen::VectorXcd diagonal = energy_basis_diagonal(terms, spectral);
  EXPECT_LT((diagonal - op.entries.diagonal()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(EnergyBasis, RejectsForeignBasis) {
  const auto a = diagonalize(build_chain_hamiltonian(4, 0.1));
  const auto b = diagonalize(build_chain_hamiltonian(4, 0.2));
  const auto x = to_energy_basis(site_operator(PauliAxis::X, 1, 4), a);
  EXPECT_THROW(x.to_computational_basis(b), ContractError);
  EXPECT_THROW(to_energy_basis(site_operator(PauliAxis::X, 1, 3), a), DimensionError);
}

TEST(Genericity, SidonSets) {
  const std::vector<double> sidon{0.0, 1.0, 3.0, 7.0};
  EXPECT_TRUE(check_generic_spectrum(sidon, 1e-6).passed);
  const std::vector<double> arithmetic{0.0, 1.0, 2.0, 3.0};
  const auto report = check_generic_spectrum(arithmetic, 1e-6);
  EXPECT_FALSE(report.passed);
  bool found = false;
  for (const auto& q : report.violations) {
    const auto key = reference::canonical_collision(q.p, q.q, q.r, q.s);
    found = found || key == reference::CollisionKey{0, 3, 1, 2};
  }
  EXPECT_TRUE(found);
}

TEST(Genericity, ChainExamples) {
  const auto generic = diagonalize(build_chain_hamiltonian(5, 0.1));
  EXPECT_TRUE(check_generic_spectrum(generic.energy_span(), 1e-8).passed);
  const auto degenerate = diagonalize(build_chain_hamiltonian(6, 0.0));
  const auto report = check_generic_spectrum(degenerate.energy_span(), 1e-8);
  EXPECT_FALSE(report.passed);
  EXPECT_GT(report.violation_count, 0u);
  EXPECT_EQ(report.smallest_gap, 0.0);
}

TEST(Genericity, NearMissesAreReportedSeparately) {
  // Only 0 + (2 + 3e-6) against 1 + 1 comes within ten tolerances.
  const std::vector<double> energies{0.0, 1.0, 2.0 + 3e-6, 5.0};
  const auto report = check_generic_spectrum(energies, 1e-6);
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.near_miss_count, 1u);
  EXPECT_NEAR(report.smallest_gap, 3e-6, 1e-12);
  EXPECT_NEAR(report.smallest_positive_gap, 3e-6, 1e-12);
  EXPECT_THROW(check_generic_spectrum(energies, 0.0), DomainError);
}

TEST(Genericity, ScanMatchesBruteForce) {
  const auto spectral = diagonalize(build_chain_hamiltonian(6, 0.0));
  const auto energies = spectral.energy_span();
  for (double tol : {1e-8, 1e-2, 5e-2}) {
    const auto report = check_generic_spectrum(energies, tol);
    std::set<reference::CollisionKey> fast;
    for (const auto& q : report.violations) {
      fast.insert(reference::canonical_collision(q.p, q.q, q.r, q.s));
    }
    EXPECT_EQ(fast, reference::brute_force_collisions(energies, tol)) << tol;
    EXPECT_EQ(fast.size(), report.violation_count);
  }
}

TEST(Genericity, AttachedReportGatesCertification) {
  auto spectral = diagonalize(build_chain_hamiltonian(5, 0.1));
  EXPECT_FALSE(spectral.generic_certified());
  EXPECT_FALSE(spectral.smallest_frequency().has_value());
  const auto report = check_generic_spectrum(spectral.energy_span(), 1e-8);
  spectral.attach_genericity(report);
  EXPECT_TRUE(spectral.generic_certified());
  EXPECT_EQ(*spectral.generic_tolerance(), 1e-8);
  EXPECT_EQ(*spectral.smallest_frequency(), report.smallest_positive_gap);
}

TEST(EnergyMoment, Examples) {
  const auto model = build_chain_hamiltonian(6, 0.1);
  const auto spectral = diagonalize(model);
  EXPECT_NEAR(energy_moment(spectral.energy_span(), 1), 0.0, 1e-9);
  EXPECT_NEAR(energy_moment(spectral.energy_span(), 2) / (2.3625 * 6), 1.0, 1e-8);
  const Matrix h = model.total().entries();
  const Matrix h2 = h * h;
  const double fourth = (h2 * h2).trace().real() / 64.0;
  EXPECT_NEAR(energy_moment(spectral.energy_span(), 4) / fourth, 1.0, 1e-10);
  EXPECT_THROW(energy_moment(spectral.energy_span(), 0), DomainError);
}

TEST(EnergyMoment, FourthMomentApproachesGaussianScaling) {
  // <H^4> / n^2 settles toward a constant as the spectrum turns Gaussian.
  std::vector<double> ratios;
  for (int n = 6; n <= 10; ++n) {
    const auto spectral = diagonalize(build_chain_hamiltonian(n, 0.1));
    ratios.push_back(energy_moment(spectral.energy_span(), 4) / (n * n));
  }
  for (std::size_t i = 2; i < ratios.size(); ++i) {
    EXPECT_LT(std::abs(ratios[i] - ratios[i - 1]), std::abs(ratios[i - 1] - ratios[i - 2]));
  }
}

TEST(Leakage, Examples) {
  const auto model = build_chain_hamiltonian(6, 0.1);
  const auto spectral = diagonalize(model);
  const auto h = to_energy_basis(model.total(), spectral);
  EXPECT_LT(microcanonical_leakage(h, spectral.energy_span(), 0.0, 1.0), 1e-9);
  const auto id = to_energy_basis(DenseOperator::identity(6), spectral);
  EXPECT_LT(microcanonical_leakage(id, spectral.energy_span(), -1.0, 1.0), 1e-12);
  EXPECT_THROW(microcanonical_leakage(h, spectral.energy_span(), 1.0, 1.0), DomainError);
  EXPECT_EQ(microcanonical_leakage(h, spectral.energy_span(), -100.0, -99.0), 0.0);
}

TEST(Leakage, NeverGrowsWithTheGap) {
  const auto spectral = diagonalize(build_chain_hamiltonian(8, 0.1));
  const auto x = to_energy_basis(site_operator(PauliAxis::X, 1, 8), spectral);
  double previous = std::numeric_limits<double>::infinity();
  for (double gap = 0.25; gap <= 8.0; gap += 0.25) {
    const double value = microcanonical_leakage(x, spectral.energy_span(), 0.0, gap);
    EXPECT_LE(value, previous + 1e-14) << gap;
    previous = value;
  }
}
