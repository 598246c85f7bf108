#pragma once

#include <cstdint>
#include <random>

#include "otoc_lab/operators.hpp"

namespace otoc {

struct HaarEstimate {
  Complex mc_value{};
  double mc_std_error = 0.0;
  Complex closed_form{};
  std::int64_t samples = 0;
  int dim = 0;
  std::uint64_t seed = 0;
};

// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
// of R's diagonal pushed into Q. Without that correction the result is not
// Haar distributed.
Matrix sample_haar_unitary(int dim, std::mt19937_64& rng);

// Haar average of <A (U^dag B U) C (U^dag D U)>:
//   <AC><B><D> + <A><C><BD> - <A><B><C><D> - <AC>_c <BD>_c / (d^2 - 1)
Complex haar_otoc_closed_form(const Matrix& a, const Matrix& b, const Matrix& c,
                              const Matrix& d);

// Direct Monte Carlo estimate of the same average. Sample k draws from a
// generator seeded by (seed, k / block), so results do not depend on the
// number of threads.
HaarEstimate haar_otoc_monte_carlo(const Matrix& a, const Matrix& b, const Matrix& c,
                                   const Matrix& d, std::int64_t samples, std::uint64_t seed,
                                   unsigned threads = 0);

// Random traceless Hermitian matrix with unit normalized Frobenius norm
// (<X^2> = 1).
Matrix random_traceless_hermitian(int dim, std::mt19937_64& rng);

}  // namespace otoc
