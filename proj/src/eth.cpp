#include "otoc_lab/eth.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/format.hpp"

namespace otoc {

DiagonalProfile diagonal_profile(const EnergyBasisOperator& op, const SpectralData& spectral,
                                 int sites) {
  if (op.dim() != spectral.dim() || !(op.tag == spectral.tag())) {
    throw ContractError("operator '" + op.source_label + "' is not in this eigenbasis");
  }
  if (sites < 1) throw DomainError("site count must be positive");
  DiagonalProfile profile;
  profile.operator_label = op.source_label;
  profile.sites = sites;
  profile.points.reserve(static_cast<std::size_t>(op.dim()));
  const Eigen::VectorXd& e = spectral.energies();
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    profile.points.push_back({e(j) / sites, op.entries(j, j)});
  }
  return profile;
}

DiagonalProfile diagonal_profile(std::span<const PauliString> terms, const SpectralData& spectral,
                                 int sites, std::string label) {
  if (sites < 1) throw DomainError("site count must be positive");
  const Eigen::VectorXcd diagonal = energy_basis_diagonal(terms, spectral);
  DiagonalProfile profile;
  profile.operator_label = std::move(label);
  profile.sites = sites;
  profile.points.reserve(static_cast<std::size_t>(diagonal.size()));
  const Eigen::VectorXd& e = spectral.energies();
  for (Eigen::Index j = 0; j < e.size(); ++j) profile.points.push_back({e(j) / sites, diagonal(j)});
  return profile;
}

EthFit fit_linear_response(const DiagonalProfile& profile, double window,
                           std::size_t min_points) {
  if (!(window > 0.0)) throw DomainError("fit window must be positive");
  std::vector<const ProfilePoint*> used;
  for (const auto& p : profile.points) {
    if (std::abs(p.energy_density) < window) used.push_back(&p);
  }
  if (used.size() < std::max<std::size_t>(min_points, 2)) {
    throw InsufficientDataError("only " + std::to_string(used.size()) +
                                " eigenstates inside the fit window " + std::to_string(window));
  }
  const double count = static_cast<double>(used.size());
  double mean_x = 0.0;
  Complex mean_y = 0.0;
  for (const auto* p : used) {
    mean_x += p->energy_density;
    mean_y += p->value;
  }
  mean_x /= count;
  mean_y /= count;
  double sxx = 0.0;
  Complex sxy = 0.0;
  for (const auto* p : used) {
    const double dx = p->energy_density - mean_x;
    sxx += dx * dx;
    sxy += dx * (p->value - mean_y);
  }
  if (sxx == 0.0) throw InsufficientDataError("all in-window energy densities coincide");

  EthFit fit;
  fit.window = window;
  fit.points_used = used.size();
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  double sq = 0.0;
  for (const auto* p : used) {
    sq += std::norm(p->value - fit.intercept - fit.slope * p->energy_density);
  }
  fit.residual_rms = std::sqrt(sq / count);
  return fit;
}

namespace {

double moment_of(const Eigen::VectorXcd& diagonal, int p) {
  if (p != 2 && p != 4) throw DomainError("diagonal moment order must be 2 or 4");
  if (diagonal.size() == 0) throw DimensionError("diagonal moment of an empty operator");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < diagonal.size(); ++j) {
    const double sq = std::norm(diagonal(j));
    sum += p == 2 ? sq : sq * sq;
  }
  return sum / static_cast<double>(diagonal.size());
}

}  // namespace

double diagonal_moment(const EnergyBasisOperator& op, int p) {
  return moment_of(op.entries.diagonal(), p);
}

double diagonal_moment(const DiagonalProfile& profile, int p) {
  Eigen::VectorXcd diagonal(static_cast<Eigen::Index>(profile.points.size()));
  for (std::size_t j = 0; j < profile.points.size(); ++j) {
    diagonal(static_cast<Eigen::Index>(j)) = profile.points[j].value;
  }
  return moment_of(diagonal, p);
}

double zero_density_fraction(std::span<const double> energies, int sites, double exponent) {
  if (!(exponent > 0.5 && exponent < 1.0)) {
    throw DomainError("threshold exponent must lie in (0.5, 1)");
  }
  if (energies.empty()) return 0.0;
  const double threshold = std::pow(static_cast<double>(sites), exponent);
  std::size_t outside = 0;
  for (double e : energies) {
    if (std::abs(e) >= threshold) ++outside;
  }
  return static_cast<double>(outside) / static_cast<double>(energies.size());
}

void write_profile_csv(std::ostream& out, const DiagonalProfile& profile, double coupling) {
  out << "# n=" << profile.sites << " g=" << format_number(coupling) << " operator=" << profile.operator_label
      << '\n';
  out << "energy_density,value_re,value_im\n";
  for (const auto& p : profile.points) {
    out << format_number(p.energy_density) << ',' << format_number(p.value.real()) << ','
        << format_number(p.value.imag()) << '\n';
  }
}

}  // namespace otoc
