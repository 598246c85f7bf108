#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "otoc_lab/operators.hpp"
#include "otoc_lab/spectral.hpp"

namespace otoc {

// <A B(t) C D(t)> with every operator already in the energy basis of
// `spectral`. Operators may be shared between slots (A == C is common).
struct OtocQuery {
  std::shared_ptr<const SpectralData> spectral;
  std::shared_ptr<const EnergyBasisOperator> a;
  std::shared_ptr<const EnergyBasisOperator> b;
  std::shared_ptr<const EnergyBasisOperator> c;
  std::shared_ptr<const EnergyBasisOperator> d;

  // Throws ContractError if an operator is missing or from another basis.
  void validate() const;
  std::string operator_labels() const;
};

enum class OtocRoute { sampled, generic_closed_form, eigenstate_formula, theory_prediction };

std::string to_string(OtocRoute route);

struct OtocEstimate {
  Complex value{};
  double std_error = 0.0;
  OtocRoute route = OtocRoute::generic_closed_form;
  std::int64_t samples = 0;
  // False when sampling hit its cap before reaching the target error.
  bool converged = true;
  // Sampling window length; 0 for exact routes.
  double window = 0.0;
};

inline constexpr double kWindowCycles = 1e3;
inline constexpr double kMaxWindow = 1e12;

// Times drawn i.i.d. uniform on [burn_in, burn_in + window]. With
// `widen_to_spectrum`, a spectrum that carries a genericity scan stretches
// the window to kWindowCycles / (smallest nontrivial frequency), capped at
// kMaxWindow, so that nearly resonant phases also average out.
struct TimeSampler {
  double burn_in = 1e2;
  double window = 1e4;
  std::uint64_t seed = 0;
  bool widen_to_spectrum = true;
};

// Window actually used for `spectral`.
double effective_window(const TimeSampler& sampler, const SpectralData& spectral);

struct SamplingOptions {
  double target_std_error = 1e-4;
  std::int64_t max_samples = 100000;
  std::int64_t min_samples = 32;
  std::int64_t batch_size = 64;
  unsigned threads = 0;
};

// (1/d) tr(A B(t) C D(t)); B(t) and D(t) are obtained by phase conjugation
// with e^{iEt}, so one evaluation costs two matrix products.
Complex otoc_at_time(const OtocQuery& query, double t);

// Monte Carlo estimate of the infinite-time average. Results are identical
// for any thread count.
OtocEstimate sampled_infinite_time_average(const OtocQuery& query, const TimeSampler& sampler,
                                           const SamplingOptions& options = {});

// Late-time average under the generic-spectrum assumption:
//   (1/d) sum_jk A_jj B_jk C_kk D_kj + (1/d) sum_jk A_jk B_kk C_kj D_jj
//   - (1/d) sum_j A_jj B_jj C_jj D_jj
// Throws AssumptionError unless the spectrum carries a passing genericity
// report.
OtocEstimate generic_closed_form_average(const OtocQuery& query);

// (1/d) sum_j [(AC)_jj B_jj D_jj + A_jj C_jj (BD)_jj - A_jj B_jj C_jj D_jj]
OtocEstimate eigenstate_formula_average(const OtocQuery& query);

// Leading-order late-time value of <A B(t) A^dag B^dag(t)>:
//   (<BB^dag>|<HA>|^2 + <AA^dag>|<HB>|^2) / (<H H_i> n)
double theory_prediction(const DenseOperator& a, const DenseOperator& b,
                         const HamiltonianModel& model);

// 2 <H_i^2>^2 / n, the leading term of the Hamiltonian-term OTOC.
double hamiltonian_term_prediction(const HamiltonianModel& model);

// Operator factory for translation averages: returns the Pauli expansion of
// the operator attached to 1-based site i.
using SiteOperatorFactory = std::function<std::vector<PauliString>(int site)>;

struct TranslationAverage {
  OtocEstimate closed_form;
  OtocEstimate eigenstate_formula;
};

// (1/n) sum_i of the late-time averages with A = C = fixed operator and
// B = D = the site-i operator.
TranslationAverage translation_average(const SpectralData& spectral, int sites,
                                       const std::vector<PauliString>& fixed,
                                       const SiteOperatorFactory& moving,
                                       const std::string& label);

// F_n: A = C = sigma^x_1, B = D = sigma^x_i, averaged over i.
OtocEstimate translation_averaged_fn(const SpectralData& spectral, int sites);

// Same average with A = C = H_1 and B = D = H_i.
OtocEstimate translation_averaged_hamiltonian_terms(const SpectralData& spectral,
                                                    const HamiltonianModel& model);

}  // namespace otoc
