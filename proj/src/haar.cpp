#include "otoc_lab/haar.hpp"

#include <cmath>
#include <vector>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/parallel.hpp"
#include "otoc_lab/summation.hpp"

namespace otoc {

namespace {

constexpr std::int64_t kSamplesPerBlock = 256;

Matrix ginibre(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix z(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) z(r, c) = Complex(normal(rng), normal(rng));
  }
  return z;
}

Complex mean_trace(const Matrix& x) { return x.trace() / static_cast<double>(x.rows()); }

void check_dims(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d) {
  for (const Matrix* m : {&a, &b, &c, &d}) {
    if (m->rows() != a.rows() || m->cols() != a.rows()) {
      throw DimensionError("Haar OTOC operands must be square with equal dimensions");
    }
  }
}

// c * I is invariant under conjugation, so it is passed through unchanged.
bool is_scalar(const Matrix& m) {
  const Complex c = m(0, 0);
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    for (Eigen::Index row = 0; row < m.rows(); ++row) {
      if (m(row, col) != (row == col ? c : Complex(0.0))) return false;
    }
  }
  return true;
}

Matrix conjugate(const Matrix& u, const Matrix& x, bool scalar) {
  if (scalar) return x;
  return u.adjoint() * x * u;
}

}  // namespace

Matrix sample_haar_unitary(int dim, std::mt19937_64& rng) {
  if (dim < 1) throw DomainError("unitary dimension must be positive");
  for (;;) {
    const Matrix z = ginibre(dim, rng);
    Eigen::HouseholderQR<Matrix> qr(z);
    const Matrix& packed = qr.matrixQR();
    Eigen::VectorXcd phases(dim);
    bool singular = false;
    for (int i = 0; i < dim; ++i) {
      const double magnitude = std::abs(packed(i, i));
      if (magnitude == 0.0) {
        singular = true;
        break;
      }
      phases(i) = packed(i, i) / magnitude;
    }
    if (singular) continue;
    Matrix q = qr.householderQ();
    return q * phases.asDiagonal();
  }
}

Complex haar_otoc_closed_form(const Matrix& a, const Matrix& b, const Matrix& c,
                              const Matrix& d) {
  check_dims(a, b, c, d);
  const double dim = static_cast<double>(a.rows());
  const Complex ea = mean_trace(a), eb = mean_trace(b), ec = mean_trace(c), ed = mean_trace(d);
  const Complex eac = mean_trace(a * c);
  const Complex ebd = mean_trace(b * d);
  const Complex disconnected = eac * eb * ed + ea * ec * ebd - ea * eb * ec * ed;
  const Complex connected = (eac - ea * ec) * (ebd - eb * ed);
  return disconnected - connected / (dim * dim - 1.0);
}

HaarEstimate haar_otoc_monte_carlo(const Matrix& a, const Matrix& b, const Matrix& c,
                                   const Matrix& d, std::int64_t samples, std::uint64_t seed,
                                   unsigned threads) {
  check_dims(a, b, c, d);
  if (samples < 2) throw DomainError("Haar Monte Carlo needs at least 2 samples");
  const int dim = static_cast<int>(a.rows());
  if (dim < 2) throw DomainError("Haar Monte Carlo needs dim >= 2");

  const bool b_scalar = is_scalar(b);
  const bool d_scalar = is_scalar(d);
  std::vector<Complex> values(static_cast<std::size_t>(samples));
  const std::int64_t blocks = (samples + kSamplesPerBlock - 1) / kSamplesPerBlock;
  parallel_for(static_cast<std::size_t>(blocks), threads, [&](std::size_t block) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    std::mt19937_64 rng(seq);
    const std::int64_t begin = static_cast<std::int64_t>(block) * kSamplesPerBlock;
    const std::int64_t end = std::min(samples, begin + kSamplesPerBlock);
    for (std::int64_t k = begin; k < end; ++k) {
      const Matrix u = sample_haar_unitary(dim, rng);
      const Matrix bu = conjugate(u, b, b_scalar);
      const Matrix du = conjugate(u, d, d_scalar);
      values[static_cast<std::size_t>(k)] = mean_trace(a * bu * c * du);
    }
  });

  const double count = static_cast<double>(samples);
  const Complex mean = pairwise_sum(std::span<const Complex>(values)) / count;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = std::norm(values[i] - mean);
  const double variance = pairwise_sum(std::span<const double>(sq)) / (count - 1.0);

  HaarEstimate out;
  out.mc_value = mean;
  out.mc_std_error = std::sqrt(variance / count);
  out.closed_form = haar_otoc_closed_form(a, b, c, d);
  out.samples = samples;
  out.dim = dim;
  out.seed = seed;
  return out;
}

Matrix random_traceless_hermitian(int dim, std::mt19937_64& rng) {
  if (dim < 2) throw DomainError("traceless Hermitian matrix needs dim >= 2");
  const Matrix g = ginibre(dim, rng);
  Matrix h = (g + g.adjoint()) / 2.0;
  h -= Matrix::Identity(dim, dim) * mean_trace(h);
  const double norm = std::sqrt(mean_trace(h * h).real());
  return h / norm;
}

}  // namespace otoc
