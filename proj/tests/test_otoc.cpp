#include <gtest/gtest.h>

#include <memory>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/otoc.hpp"
#include "otoc_lab/reference.hpp"

using namespace otoc;

namespace {

using OperatorPtr = std::shared_ptr<const EnergyBasisOperator>;

struct Fixture {
  HamiltonianModel model;
  std::shared_ptr<SpectralData> spectral;
};

Fixture chain(int n, double g, bool certify = true) {
  Fixture f{build_chain_hamiltonian(n, g), nullptr};
  f.spectral = std::make_shared<SpectralData>(diagonalize(f.model));
  if (certify) f.spectral->attach_genericity(check_generic_spectrum(f.spectral->energy_span()));
  return f;
}

OperatorPtr basis(const DenseOperator& op, const SpectralData& spectral) {
  return std::make_shared<const EnergyBasisOperator>(to_energy_basis(op, spectral));
}

OperatorPtr x_site(int site, int n, const SpectralData& spectral) {
  return basis(site_operator(PauliAxis::X, site, n), spectral);
}

}  // namespace

TEST(OtocAtTime, SigmaXAtTimeZeroIsOne) {
  const auto f = chain(4, 0.1);
  const auto x = x_site(1, 4, *f.spectral);
  EXPECT_NEAR(std::abs(otoc_at_time({f.spectral, x, x, x, x}, 0.0) - Complex(1.0)), 0.0, 1e-12);
}

TEST(OtocAtTime, IdentityInsertionsAreTimeIndependent) {
  const auto f = chain(4, 0.1);
  const auto a = x_site(1, 4, *f.spectral);
  const auto c = basis(site_operator(PauliAxis::Z, 3, 4), *f.spectral);
  const auto id = basis(DenseOperator::identity(4), *f.spectral);
  const Complex ac = normalized_trace_inner(site_operator(PauliAxis::X, 1, 4),
                                            site_operator(PauliAxis::Z, 3, 4));
  for (double t : {0.0, 0.7, 13.0, 1e4}) {
    EXPECT_LT(std::abs(otoc_at_time({f.spectral, a, id, c, id}, t) - ac), 1e-12) << t;
  }
}

TEST(OtocAtTime, MatchesMatrixExponentialOracle) {
  const auto f = chain(2, 0.1, false);
  const auto x = x_site(1, 2, *f.spectral);
  const Matrix xd = site_operator(PauliAxis::X, 1, 2).entries();
  for (double t : {1.0, 2.5}) {
    const Complex oracle =
        reference::otoc_by_matrix_exponential(f.model.total().entries(), xd, xd, xd, xd, t);
    EXPECT_LT(std::abs(otoc_at_time({f.spectral, x, x, x, x}, t) - oracle), 1e-8) << t;
  }
}

TEST(Sampled, IdentityInsertionsGiveExactValue) {
  const auto f = chain(4, 0.1);
  const auto a = x_site(1, 4, *f.spectral);
  const auto id = basis(DenseOperator::identity(4), *f.spectral);
  SamplingOptions options;
  options.max_samples = 256;
  const auto estimate = sampled_infinite_time_average({f.spectral, a, id, a, id}, {1e2, 1e4, 5}, options);
  EXPECT_NEAR(estimate.value.real(), 1.0, 1e-12);
  EXPECT_LT(estimate.std_error, 1e-12);
}

TEST(Sampled, AgreesWithClosedForm) {
  const auto f = chain(5, 0.1);
  const auto x = x_site(1, 5, *f.spectral);
  const OtocQuery query{f.spectral, x, x, x, x};
  const auto sampled = sampled_infinite_time_average(query, {1e2, 1e4, 11});
  const auto closed = generic_closed_form_average(query);
  EXPECT_LE(std::abs(sampled.value - closed.value), 3.0 * sampled.std_error);
  EXPECT_EQ(sampled.route, OtocRoute::sampled);
}

TEST(Sampled, SeededRunsAreBitwiseReproducible) {
  const auto f = chain(5, 0.1);
  const auto x = x_site(1, 5, *f.spectral);
  const auto z = basis(site_operator(PauliAxis::Z, 2, 5), *f.spectral);
  const OtocQuery query{f.spectral, x, z, x, z};
  SamplingOptions serial;
  serial.max_samples = 3000;
  serial.threads = 1;
  SamplingOptions parallel = serial;
  parallel.threads = 3;
  const auto first = sampled_infinite_time_average(query, {1e2, 1e4, 42}, serial);
  const auto second = sampled_infinite_time_average(query, {1e2, 1e4, 42}, serial);
  const auto threaded = sampled_infinite_time_average(query, {1e2, 1e4, 42}, parallel);
  EXPECT_EQ(first.value, second.value);
  EXPECT_EQ(first.std_error, second.std_error);
  EXPECT_EQ(first.samples, second.samples);
  EXPECT_EQ(first.value, threaded.value);
  const auto other = sampled_infinite_time_average(query, {1e2, 1e4, 43}, serial);
  EXPECT_NE(first.value, other.value);
}

TEST(Sampled, WindowStretchesToTheSmallestFrequency) {
  const auto f = chain(5, 0.1);
  const double frequency = *f.spectral->smallest_frequency();
  EXPECT_DOUBLE_EQ(effective_window({1e2, 1e4, 0}, *f.spectral), kWindowCycles / frequency);
  EXPECT_EQ(effective_window({1e2, 1e4, 0, false}, *f.spectral), 1e4);
  EXPECT_EQ(effective_window({1e2, 1e15, 0}, *f.spectral), 1e15);
  const auto bare = chain(5, 0.1, false);
  EXPECT_EQ(effective_window({1e2, 1e4, 0}, *bare.spectral), 1e4);
}

TEST(Sampled, RejectsBadOptions) {
  const auto f = chain(3, 0.1, false);
  const auto x = x_site(1, 3, *f.spectral);
  SamplingOptions options;
  options.target_std_error = 0.0;
  EXPECT_THROW(sampled_infinite_time_average({f.spectral, x, x, x, x}, {}, options), DomainError);
  EXPECT_THROW(sampled_infinite_time_average({f.spectral, x, x, x, x}, {1e2, 0.0, 0}), DomainError);
}

TEST(ClosedForm, IdentityQuadrupleIsOne) {
  const auto f = chain(5, 0.1);
  const auto id = basis(DenseOperator::identity(5), *f.spectral);
  EXPECT_NEAR(std::abs(generic_closed_form_average({f.spectral, id, id, id, id}).value - 1.0), 0.0,
              1e-12);
  EXPECT_NEAR(std::abs(eigenstate_formula_average({f.spectral, id, id, id, id}).value - 1.0), 0.0,
              1e-12);
}

TEST(ClosedForm, MatchesDeltaConstrainedQuadrupleSum) {
  const auto f = chain(6, 0.1);
  const auto x = x_site(1, 6, *f.spectral);
  const Complex closed = generic_closed_form_average({f.spectral, x, x, x, x}).value;
  const Complex oracle = reference::delta_constrained_quadruple_sum(
      x->entries, x->entries, x->entries, x->entries, f.spectral->energy_span(), 1e-8);
  EXPECT_LT(std::abs(closed - oracle), 1e-9);
}

TEST(ClosedForm, HamiltonianTermsMatchTraceIdentity) {
  // With (H_i)_jj = E_j / n the closed form for A = C = H_1, B = D = H_i
  // reduces to 2 tr(H H_i H H_i) / (d n^2) - sum_j E_j^4 / (d n^4).
  constexpr int n = 6;
  const auto f = chain(n, 0.1);
  const double d = f.spectral->dim();
  const Matrix h = f.model.total().entries();
  const Eigen::ArrayXd e = f.spectral->energies().array();
  const double fourth = e.pow(4).sum() / (d * std::pow(n, 4));
  const auto h1 = basis(f.model.local_term(1), *f.spectral);
  for (int i = 1; i <= n; ++i) {
    const Matrix hi = f.model.local_term(i).entries();
    const Complex trace = (h * hi * h * hi).trace();
    const double expected = 2.0 * trace.real() / (d * n * n) - fourth;
    const auto bi = basis(f.model.local_term(i), *f.spectral);
    const Complex closed = generic_closed_form_average({f.spectral, h1, bi, h1, bi}).value;
    EXPECT_NEAR(closed.real(), expected, 1e-10) << i;
    EXPECT_NEAR(closed.imag(), 0.0, 1e-10) << i;
  }
}

TEST(ClosedForm, SiteIndependentOnTranslationInvariantChain) {
  const auto f = chain(5, 0.1);
  const auto a = x_site(1, 5, *f.spectral);
  const Complex first = generic_closed_form_average({f.spectral, a, a, a, a}).value;
  for (int i = 2; i <= 5; ++i) {
    const auto b = x_site(i, 5, *f.spectral);
    EXPECT_LT(std::abs(generic_closed_form_average({f.spectral, a, b, a, b}).value - first), 1e-12);
  }
}

TEST(ClosedForm, RequiresCertifiedSpectrum) {
  const auto f = chain(5, 0.1, false);
  const auto x = x_site(1, 5, *f.spectral);
  EXPECT_THROW(generic_closed_form_average({f.spectral, x, x, x, x}), AssumptionError);
  const auto degenerate = chain(6, 0.0);
  EXPECT_FALSE(degenerate.spectral->generic_certified());
}

TEST(Query, RejectsMissingOrForeignOperators) {
  const auto f = chain(5, 0.1);
  const auto g = chain(5, 0.3);
  const auto x = x_site(1, 5, *f.spectral);
  const auto foreign = x_site(1, 5, *g.spectral);
  EXPECT_THROW(generic_closed_form_average({f.spectral, x, foreign, x, x}), ContractError);
  EXPECT_THROW(eigenstate_formula_average({f.spectral, x, nullptr, x, x}), ContractError);
}

TEST(EigenstateFormula, IdentityInsertionsGiveExactValue) {
  const auto f = chain(5, 0.1);
  const auto a = x_site(1, 5, *f.spectral);
  const auto c = basis(site_operator(PauliAxis::Z, 1, 5), *f.spectral);
  const auto id = basis(DenseOperator::identity(5), *f.spectral);
  const Complex expected = normalized_trace_inner(site_operator(PauliAxis::X, 1, 5),
                                                  site_operator(PauliAxis::Z, 1, 5));
  EXPECT_LT(std::abs(eigenstate_formula_average({f.spectral, a, id, c, id}).value - expected), 1e-12);
}

TEST(EigenstateFormula, ApproachesClosedFormWithSize) {
  double previous = std::numeric_limits<double>::infinity();
  for (int n = 5; n <= 9; ++n) {
    const auto f = chain(n, 0.1, false);
    f.spectral->attach_genericity(check_generic_spectrum(f.spectral->energy_span(), kPrecisionGenericTolerance));
    const auto x = x_site(1, n, *f.spectral);
    const double gap = std::abs(eigenstate_formula_average({f.spectral, x, x, x, x}).value -
                                generic_closed_form_average({f.spectral, x, x, x, x}).value);
    EXPECT_LT(gap, previous) << n;
    previous = gap;
  }
}

TEST(Theory, Examples) {
  const auto model = build_chain_hamiltonian(10, 0.1);
  const auto x1 = site_operator(PauliAxis::X, 1, 10);
  EXPECT_NEAR(theory_prediction(x1, x1, model), (14.0 / 15.0) / 10.0, 1e-14);
  const auto free = build_chain_hamiltonian(6, 0.0);
  const auto y1 = site_operator(PauliAxis::Y, 1, 6);
  EXPECT_EQ(theory_prediction(y1, y1, free), 0.0);
  const auto chain6 = build_chain_hamiltonian(6, 0.1);
  EXPECT_NEAR(theory_prediction(chain6.local_term(1), chain6.local_term(1), chain6),
              hamiltonian_term_prediction(chain6), 1e-13);
  EXPECT_THROW(theory_prediction(DenseOperator::identity(6), y1, chain6), DomainError);
  EXPECT_THROW(theory_prediction(x1, y1, chain6), DimensionError);
}

TEST(Theory, HamiltonianTermPrediction) {
  EXPECT_NEAR(hamiltonian_term_prediction(build_chain_hamiltonian(10, 0.1)), 1.11628125, 1e-12);
  EXPECT_NEAR(hamiltonian_term_prediction(build_chain_hamiltonian(8, 0.0)),
              2.0 * 2.3525 * 2.3525 / 8.0, 1e-12);
  EXPECT_NEAR(hamiltonian_term_prediction(build_chain_hamiltonian(6, 0.1)),
              2.0 * hamiltonian_term_prediction(build_chain_hamiltonian(12, 0.1)), 1e-12);
}

TEST(TranslationAverage, FnIsRealAndAveragesSites) {
  constexpr int n = 5;
  const auto f = chain(n, 0.1);
  const auto fn = translation_averaged_fn(*f.spectral, n);
  EXPECT_LE(std::abs(fn.value.imag()), 1e-9);
  const auto a = x_site(1, n, *f.spectral);
  Complex manual = 0.0;
  for (int i = 1; i <= n; ++i) {
    const auto b = x_site(i, n, *f.spectral);
    manual += generic_closed_form_average({f.spectral, a, b, a, b}).value;
  }
  EXPECT_LT(std::abs(fn.value - manual / double(n)), 1e-12);
  EXPECT_LT(fn.value.real(), 14.0 / 75.0);
  EXPECT_THROW(translation_averaged_fn(*f.spectral, 4), DimensionError);
}

TEST(TranslationAverage, HamiltonianTermsAgreeWithPerSiteClosedForms) {
  constexpr int n = 5;
  const auto f = chain(n, 0.1);
  const auto averaged = translation_averaged_hamiltonian_terms(*f.spectral, f.model);
  const auto h1 = basis(f.model.local_term(1), *f.spectral);
  Complex manual = 0.0;
  for (int i = 1; i <= n; ++i) {
    const auto hi = basis(f.model.local_term(i), *f.spectral);
    manual += generic_closed_form_average({f.spectral, h1, hi, h1, hi}).value;
  }
  EXPECT_LT(std::abs(averaged.value - manual / double(n)), 1e-10);
}
