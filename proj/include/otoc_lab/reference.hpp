#pragma once

// Slow, definition-level evaluations used to cross-check the fast routes.
// Nothing here shares code with the implementations it verifies.

#include <array>
#include <cstddef>
#include <set>
#include <span>

#include "otoc_lab/operators.hpp"
#include "otoc_lab/spectral.hpp"

namespace otoc::reference {

// (1/d) sum_{pqrs} A_pq B_qr C_rs D_sp over |E_p + E_r - E_q - E_s| < tol.
// O(d^4).
Complex delta_constrained_quadruple_sum(const Matrix& a, const Matrix& b, const Matrix& c,
                                        const Matrix& d, std::span<const double> energies,
                                        double tolerance);

// Nontrivial collisions, each written as {{min(p,r), max(p,r)}, {min(q,s), max(q,s)}}
// with the smaller pair first.
using CollisionKey = std::array<std::size_t, 4>;
CollisionKey canonical_collision(std::size_t p, std::size_t q, std::size_t r, std::size_t s);

// Enumerates every ordered quadruple. O(d^4).
std::set<CollisionKey> brute_force_collisions(std::span<const double> energies,
                                              double tolerance);

// exp(m) by Taylor series with scaling and squaring.
Matrix matrix_exponential(const Matrix& m);

// (1/d) tr(A B(t) C D(t)) with X(t) = e^{iHt} X e^{-iHt}, all in the
// computational basis.
Complex otoc_by_matrix_exponential(const Matrix& h, const Matrix& a, const Matrix& b,
                                   const Matrix& c, const Matrix& d, double t);

// (1/d) tr(X)
Complex normalized_trace(const Matrix& x);

}  // namespace otoc::reference
