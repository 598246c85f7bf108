#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "otoc_lab/spectral.hpp"

namespace otoc {

inline constexpr double kDefaultFitWindow = 0.5;
inline constexpr std::size_t kMinFitPoints = 10;

struct ProfilePoint {
  double energy_density = 0.0;  // E_j / n
  Complex value{};              // X_jj
};

// Diagonal matrix elements against energy density, in spectral order.
struct DiagonalProfile {
  std::vector<ProfilePoint> points;
  std::string operator_label;
  int sites = 0;
};

// Least-squares line value ~ intercept + slope * energy_density over
// |energy_density| < window.
struct EthFit {
  Complex intercept{};
  Complex slope{};
  double window = kDefaultFitWindow;
  double residual_rms = 0.0;
  std::size_t points_used = 0;
};

DiagonalProfile diagonal_profile(const EnergyBasisOperator& op, const SpectralData& spectral,
                                 int sites);
// Same profile for a Pauli sum, without forming the full energy-basis matrix.
DiagonalProfile diagonal_profile(std::span<const PauliString> terms, const SpectralData& spectral,
                                 int sites, std::string label);

// Ordinary (unweighted) least squares; real and imaginary parts share the
// design matrix. Throws InsufficientDataError below `min_points`.
EthFit fit_linear_response(const DiagonalProfile& profile, double window = kDefaultFitWindow,
                           std::size_t min_points = kMinFitPoints);

// (1/d) sum_j |X_jj|^p for p in {2, 4}.
double diagonal_moment(const EnergyBasisOperator& op, int p);
double diagonal_moment(const DiagonalProfile& profile, int p);

// Fraction of levels with |E_j| >= n^exponent, for 0.5 < exponent < 1.
double zero_density_fraction(std::span<const double> energies, int sites, double exponent);

// "energy_density,value_re,value_im" rows after a "# n=.. g=.. operator=.." line.
void write_profile_csv(std::ostream& out, const DiagonalProfile& profile, double coupling);

}  // namespace otoc
