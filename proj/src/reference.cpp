#include "otoc_lab/reference.hpp"

#include <algorithm>
#include <cmath>

#include "otoc_lab/errors.hpp"

namespace otoc::reference {

Complex delta_constrained_quadruple_sum(const Matrix& a, const Matrix& b, const Matrix& c,
                                        const Matrix& d, std::span<const double> energies,
                                        double tolerance) {
  const auto dim = static_cast<Eigen::Index>(energies.size());
  for (const Matrix* m : {&a, &b, &c, &d}) {
    if (m->rows() != dim || m->cols() != dim) {
      throw DimensionError("quadruple sum operands must match the spectrum size");
    }
  }
  Complex total = 0.0;
  for (Eigen::Index p = 0; p < dim; ++p) {
    for (Eigen::Index q = 0; q < dim; ++q) {
      const Complex apq = a(p, q);
      for (Eigen::Index r = 0; r < dim; ++r) {
        const double partial = energies[p] + energies[r] - energies[q];
        const Complex abqr = apq * b(q, r);
        for (Eigen::Index s = 0; s < dim; ++s) {
          if (std::abs(partial - energies[s]) < tolerance) total += abqr * c(r, s) * d(s, p);
        }
      }
    }
  }
  return total / static_cast<double>(dim);
}

CollisionKey canonical_collision(std::size_t p, std::size_t q, std::size_t r, std::size_t s) {
  std::array<std::size_t, 2> left{std::min(p, r), std::max(p, r)};
  std::array<std::size_t, 2> right{std::min(q, s), std::max(q, s)};
  if (right < left) std::swap(left, right);
  return {left[0], left[1], right[0], right[1]};
}

std::set<CollisionKey> brute_force_collisions(std::span<const double> energies,
                                              double tolerance) {
  std::set<CollisionKey> out;
  const std::size_t d = energies.size();
  for (std::size_t p = 0; p < d; ++p) {
    for (std::size_t q = 0; q < d; ++q) {
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t s = 0; s < d; ++s) {
          const bool trivial = (p == q && r == s) || (p == s && r == q);
          if (trivial) continue;
          if (std::abs(energies[p] + energies[r] - energies[q] - energies[s]) < tolerance) {
            out.insert(canonical_collision(p, q, r, s));
          }
        }
      }
    }
  }
  return out;
}

Matrix matrix_exponential(const Matrix& m) {
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix scaled = m / std::ldexp(1.0, squarings);
  Matrix term = Matrix::Identity(m.rows(), m.cols());
  Matrix sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = (sum * sum).eval();
  return sum;
}

Complex otoc_by_matrix_exponential(const Matrix& h, const Matrix& a, const Matrix& b,
                                   const Matrix& c, const Matrix& d, double t) {
  const Matrix u = matrix_exponential(Complex(0.0, t) * h);
  const Matrix bt = u * b * u.adjoint();
  const Matrix dt = u * d * u.adjoint();
  return normalized_trace(a * bt * c * dt);
}

Complex normalized_trace(const Matrix& x) { return x.trace() / static_cast<double>(x.rows()); }

}  // namespace otoc::reference
