#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otoc_lab/operators.hpp"

namespace otoc {

inline constexpr double kDefaultGenericTolerance = 1e-8;
inline constexpr double kNearMissFactor = 10.0;
// Collision tolerance just above the rounding error of E_p + E_r - E_q - E_s
// for chains of up to 14 sites.
inline constexpr double kPrecisionGenericTolerance = 1e-13;
inline constexpr double kDecompositionTolerance = 1e-9;

// Identifies which Hamiltonian an eigenbasis belongs to. `coupling` is NaN
// for matrices that did not come from the chain model.
struct ModelTag {
  int sites = 0;
  double coupling = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t build_hash = 0;

  bool operator==(const ModelTag& other) const;
};

// One nontrivial solution of E_p + E_r ~ E_q + E_s (0-based level indices).
struct Quadruple {
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t r = 0;
  std::size_t s = 0;
  double gap = 0.0;  // |E_p + E_r - E_q - E_s|
};

struct GenericityReport {
  bool passed = true;
  double tolerance = kDefaultGenericTolerance;
  // Collisions below `tolerance`; at most `max_recorded` are listed, but the
  // counts are exact.
  std::vector<Quadruple> violations;
  std::vector<Quadruple> near_misses;  // tolerance <= gap < 10 * tolerance
  std::size_t violation_count = 0;
  std::size_t near_miss_count = 0;
  double smallest_gap = std::numeric_limits<double>::infinity();
  double smallest_positive_gap = std::numeric_limits<double>::infinity();
};

// Eigendecomposition H = V diag(E) V^dagger with E sorted ascending.
class SpectralData {
 public:
  SpectralData(Eigen::VectorXd energies, Matrix eigenvectors, ModelTag tag);

  const Eigen::VectorXd& energies() const { return energies_; }
  std::span<const double> energy_span() const {
    return {energies_.data(), static_cast<std::size_t>(energies_.size())};
  }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  const ModelTag& tag() const { return tag_; }
  int dim() const { return static_cast<int>(energies_.size()); }

  // Records a genericity scan of these energies. Formulas that rely on the
  // generic-spectrum assumption refuse to run until a passing report is
  // attached.
  void attach_genericity(const GenericityReport& report);
  bool generic_certified() const { return generic_tolerance_.has_value(); }
  std::optional<double> generic_tolerance() const { return generic_tolerance_; }
  // Smallest nonzero |E_p + E_r - E_q - E_s| over nontrivial quadruples, once
  // a scan has been attached (passing or not).
  std::optional<double> smallest_frequency() const { return smallest_frequency_; }

 private:
  Eigen::VectorXd energies_;
  Matrix eigenvectors_;
  ModelTag tag_;
  std::optional<double> generic_tolerance_;
  std::optional<double> smallest_frequency_;
};

// X_jk = <j|X|k>.
struct EnergyBasisOperator {
  Matrix entries;
  std::string source_label;
  ModelTag tag;

  int dim() const { return static_cast<int>(entries.rows()); }
  Eigen::VectorXcd diagonal() const { return entries.diagonal(); }
  // V X V^dagger, back in the computational basis.
  Matrix to_computational_basis(const SpectralData& spectral) const;
};

SpectralData diagonalize(const DenseOperator& hamiltonian, int max_sites = kDefaultMaxSites);
SpectralData diagonalize(const HamiltonianModel& model, int max_sites = kDefaultMaxSites);

ModelTag model_tag(const HamiltonianModel& model);

// max |H V - V diag(E)| / max|H|, with max|H| floored at 1. Diagonalization
// throws NumericalError when this exceeds kDecompositionTolerance.
double decomposition_residual(const DenseOperator& hamiltonian, const SpectralData& spectral);

EnergyBasisOperator to_energy_basis(const DenseOperator& op, const SpectralData& spectral);
// Same transform for a Pauli sum without materializing the operator densely.
EnergyBasisOperator to_energy_basis(std::span<const PauliString> terms,
                                    const SpectralData& spectral, std::string label);

// Diagonal of the energy-basis form of a Pauli sum, in O(terms * d^2).
Eigen::VectorXcd energy_basis_diagonal(std::span<const PauliString> terms,
                                       const SpectralData& spectral);

// Sorted pair-sum scan for nontrivial collisions E_p + E_r = E_q + E_s.
// Runs in O(d^2 log d) time and O(d^2) memory.
GenericityReport check_generic_spectrum(
    std::span<const double> energies, double tolerance = kDefaultGenericTolerance,
    std::size_t max_recorded = std::numeric_limits<std::size_t>::max());

// (1/d) sum_j E_j^m
double energy_moment(std::span<const double> energies, int m);

// Largest singular value of the block of X with row energies < eps and
// column energies >= eps_prime. Zero when either side of the window is empty.
double microcanonical_leakage(const EnergyBasisOperator& op, std::span<const double> energies,
                              double eps, double eps_prime);

}  // namespace otoc
