#include "otoc_lab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <vector>

#include <lapacke.h>

#include "otoc_lab/checksum.hpp"
#include "otoc_lab/errors.hpp"
#include "otoc_lab/linalg.hpp"
#include "otoc_lab/summation.hpp"

namespace otoc {

bool ModelTag::operator==(const ModelTag& other) const {
  const bool same_coupling =
      coupling == other.coupling || (std::isnan(coupling) && std::isnan(other.coupling));
  return sites == other.sites && same_coupling && build_hash == other.build_hash;
}

SpectralData::SpectralData(Eigen::VectorXd energies, Matrix eigenvectors, ModelTag tag)
    : energies_(std::move(energies)), eigenvectors_(std::move(eigenvectors)), tag_(tag) {
  if (eigenvectors_.rows() != energies_.size() || eigenvectors_.cols() != energies_.size()) {
    throw DimensionError("eigenvector matrix does not match the number of energies");
  }
  if (!std::is_sorted(energies_.begin(), energies_.end())) {
    throw ContractError("energies must be sorted in non-descending order");
  }
}

void SpectralData::attach_genericity(const GenericityReport& report) {
  if (report.passed) {
    generic_tolerance_ = report.tolerance;
  } else {
    generic_tolerance_.reset();
  }
  if (std::isfinite(report.smallest_positive_gap)) {
    smallest_frequency_ = report.smallest_positive_gap;
  }
}

Matrix EnergyBasisOperator::to_computational_basis(const SpectralData& spectral) const {
  if (!(tag == spectral.tag()) || dim() != spectral.dim()) {
    throw ContractError("operator '" + source_label + "' is not expressed in this eigenbasis");
  }
  const Matrix& v = spectral.eigenvectors();
  return multiply(multiply(v, entries), Op::none, v, Op::adjoint);
}

ModelTag model_tag(const HamiltonianModel& model) {
  return ModelTag{model.sites(), model.coupling(), model.build_hash()};
}

namespace {

double max_abs_entry(const DenseOperator& h) {
  if (h.is_materialized() || !h.has_pauli_expansion()) return h.entries().cwiseAbs().maxCoeff();
  // Row b of a Pauli sum has one entry per distinct flip mask.
  std::map<std::uint64_t, std::vector<const PauliString*>> groups;
  for (const auto& term : h.pauli_expansion()) groups[term.flip_mask()].push_back(&term);
  double out = 0.0;
  for (const auto& [mask, terms] : groups) {
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(h.dim()); ++b) {
      Complex sum = 0.0;
      for (const PauliString* term : terms) sum += term->phase(b);
      out = std::max(out, std::abs(sum));
    }
  }
  return out;
}

double residual_of(const DenseOperator& h, const Eigen::VectorXd& energies, const Matrix& vectors) {
  if (vectors.rows() != h.dim()) throw DimensionError("eigenvectors do not match the operator");
  Matrix hv;
  if (h.has_pauli_expansion()) {
    hv = Matrix::Zero(vectors.rows(), vectors.cols());
    for (const auto& term : h.pauli_expansion()) accumulate_pauli_action(term, vectors, hv);
  } else {
    multiply_into(hv, h.entries(), Op::none, vectors, Op::none);
  }
  hv -= vectors * energies.cast<Complex>().asDiagonal();
  return hv.cwiseAbs().maxCoeff() / std::max(max_abs_entry(h), 1.0);
}

Eigen::VectorXd energies_of_spectrum(const DenseOperator& h, int max_sites, Matrix& vectors) {
  if (h.sites() > max_sites) {
    throw ResourceError(std::to_string(h.sites()) + " sites exceed the dense cap of " +
                        std::to_string(max_sites));
  }
  if (!h.hermitian()) {
    throw ContractError("cannot diagonalize non-Hermitian operator '" + h.label() + "'");
  }
  const int d = h.dim();
  Matrix work = h.entries();
  vectors.resize(d, d);
  Eigen::VectorXd energies(d);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(d));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_zheevr(
      LAPACK_COL_MAJOR, 'V', 'A', 'U', d, reinterpret_cast<lapack_complex_double*>(work.data()),
      d, 0.0, 0.0, 0, 0, 0.0, &found, energies.data(),
      reinterpret_cast<lapack_complex_double*>(vectors.data()), d, support.data());
  if (info != 0 || found != d) {
    throw NumericalError("zheevr failed for '" + h.label() + "' (dim " + std::to_string(d) +
                         ", info " + std::to_string(info) + ", found " + std::to_string(found) +
                         ")");
  }
  work = Matrix();
  const double residual = residual_of(h, energies, vectors);
  if (!(residual <= kDecompositionTolerance)) {
    throw NumericalError("eigendecomposition of '" + h.label() + "' has relative residual " +
                         std::to_string(residual) + "; the LAPACK/BLAS build is unreliable");
  }
  return energies;
}

}  // namespace

SpectralData diagonalize(const DenseOperator& hamiltonian, int max_sites) {
  Matrix vectors;
  Eigen::VectorXd energies = energies_of_spectrum(hamiltonian, max_sites, vectors);
  const Matrix& h = hamiltonian.entries();
  ModelTag tag;
  tag.sites = hamiltonian.sites();
  tag.build_hash = crc64(std::as_bytes(std::span(h.data(), static_cast<std::size_t>(h.size()))));
  return SpectralData(std::move(energies), std::move(vectors), tag);
}

SpectralData diagonalize(const HamiltonianModel& model, int max_sites) {
  Matrix vectors;
  Eigen::VectorXd energies = energies_of_spectrum(model.total(), max_sites, vectors);
  return SpectralData(std::move(energies), std::move(vectors), model_tag(model));
}

double decomposition_residual(const DenseOperator& hamiltonian, const SpectralData& spectral) {
  return residual_of(hamiltonian, spectral.energies(), spectral.eigenvectors());
}

EnergyBasisOperator to_energy_basis(const DenseOperator& op, const SpectralData& spectral) {
  if (op.dim() != spectral.dim()) {
    throw DimensionError("operator '" + op.label() + "' has dim " + std::to_string(op.dim()) +
                         " but the eigenbasis has dim " + std::to_string(spectral.dim()));
  }
  if (op.has_pauli_expansion() &&
      op.pauli_expansion().size() < static_cast<std::size_t>(op.dim())) {
    return to_energy_basis(op.pauli_expansion(), spectral, op.label());
  }
  const Matrix& v = spectral.eigenvectors();
  const Matrix xv = multiply(op.entries(), v);
  EnergyBasisOperator out{Matrix(), op.label(), spectral.tag()};
  multiply_into(out.entries, v, Op::adjoint, xv, Op::none);
  return out;
}

EnergyBasisOperator to_energy_basis(std::span<const PauliString> terms,
                                    const SpectralData& spectral, std::string label) {
  const Matrix& v = spectral.eigenvectors();
  Matrix xv = Matrix::Zero(v.rows(), v.cols());
  for (const auto& term : terms) accumulate_pauli_action(term, v, xv);
  EnergyBasisOperator out{Matrix(), std::move(label), spectral.tag()};
  multiply_into(out.entries, v, Op::adjoint, xv, Op::none);
  return out;
}

Eigen::VectorXcd energy_basis_diagonal(std::span<const PauliString> terms,
                                       const SpectralData& spectral) {
  const Matrix& v = spectral.eigenvectors();
  Matrix xv = Matrix::Zero(v.rows(), v.cols());
  for (const auto& term : terms) accumulate_pauli_action(term, v, xv);
  return (v.conjugate().array() * xv.array()).colwise().sum().transpose();
}

GenericityReport check_generic_spectrum(std::span<const double> energies, double tolerance,
                                        std::size_t max_recorded) {
  if (!(tolerance > 0.0)) throw DomainError("genericity tolerance must be positive");
  GenericityReport report;
  report.tolerance = tolerance;
  const std::size_t d = energies.size();
  if (d == 0) return report;

  struct PairSum {
    double sum;
    std::uint32_t p;
    std::uint32_t r;
  };
  std::vector<PairSum> pairs;
  pairs.reserve(d * (d + 1) / 2);
  for (std::size_t p = 0; p < d; ++p) {
    for (std::size_t r = p; r < d; ++r) {
      pairs.push_back({energies[p] + energies[r], static_cast<std::uint32_t>(p),
                       static_cast<std::uint32_t>(r)});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const PairSum& a, const PairSum& b) {
    if (a.sum != b.sum) return a.sum < b.sum;
    if (a.p != b.p) return a.p < b.p;
    return a.r < b.r;
  });

  // Each unordered pair {p, r} appears once, so any two entries form a
  // nontrivial quadruple.
  const double near_limit = kNearMissFactor * tolerance;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i + 1 < pairs.size()) {
      const double next = pairs[i + 1].sum - pairs[i].sum;
      report.smallest_gap = std::min(report.smallest_gap, next);
      if (next > 0.0) report.smallest_positive_gap = std::min(report.smallest_positive_gap, next);
    }
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      const double gap = pairs[j].sum - pairs[i].sum;
      if (gap >= near_limit) break;
      const Quadruple quad{pairs[i].p, pairs[j].p, pairs[i].r, pairs[j].r, gap};
      if (gap < tolerance) {
        ++report.violation_count;
        if (report.violations.size() < max_recorded) report.violations.push_back(quad);
      } else {
        ++report.near_miss_count;
        if (report.near_misses.size() < max_recorded) report.near_misses.push_back(quad);
      }
    }
  }
  report.passed = report.violation_count == 0;
  return report;
}

double energy_moment(std::span<const double> energies, int m) {
  if (m < 1) throw DomainError("moment order must be positive");
  if (energies.empty()) return 0.0;
  std::vector<double> powers(energies.size());
  std::transform(energies.begin(), energies.end(), powers.begin(), [m](double e) {
    double acc = 1.0;
    for (int k = 0; k < m; ++k) acc *= e;
    return acc;
  });
  return pairwise_sum(std::span<const double>(powers)) / static_cast<double>(energies.size());
}

double microcanonical_leakage(const EnergyBasisOperator& op, std::span<const double> energies,
                              double eps, double eps_prime) {
  if (!(eps < eps_prime)) throw DomainError("leakage window needs eps < eps_prime");
  if (static_cast<std::size_t>(op.dim()) != energies.size()) {
    throw DimensionError("operator and spectrum sizes differ");
  }
  const auto rows_end = std::lower_bound(energies.begin(), energies.end(), eps) - energies.begin();
  const auto cols_begin =
      std::lower_bound(energies.begin(), energies.end(), eps_prime) - energies.begin();
  const auto cols = static_cast<Eigen::Index>(energies.size()) - cols_begin;
  if (rows_end == 0 || cols == 0) return 0.0;
  const Matrix block = op.entries.block(0, cols_begin, rows_end, cols);
  Eigen::BDCSVD<Matrix> svd(block);
  return svd.singularValues()(0);
}

}  // namespace otoc
