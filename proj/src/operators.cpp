#include "otoc_lab/operators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "otoc_lab/checksum.hpp"
#include "otoc_lab/errors.hpp"
#include "otoc_lab/format.hpp"

namespace otoc {

namespace {

constexpr double kHermitianTolerance = 1e-12;

int sites_from_dim(Eigen::Index dim) {
  if (dim < 1 || !std::has_single_bit(static_cast<std::uint64_t>(dim))) {
    throw DimensionError("operator dimension " + std::to_string(dim) + " is not a power of two");
  }
  return std::countr_zero(static_cast<std::uint64_t>(dim));
}

void check_site_cap(int sites, int max_sites) {
  if (sites > max_sites) {
    throw ResourceError(std::to_string(sites) + " sites exceed the dense cap of " +
                        std::to_string(max_sites));
  }
}

bool dense_is_hermitian(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  double worst = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r <= c; ++r) {
      worst = std::max(worst, std::abs(m(r, c) - std::conj(m(c, r))));
    }
  }
  return worst <= kHermitianTolerance * scale;
}

// Pauli strings are Hermitian and linearly independent, so a combination is
// Hermitian exactly when every merged coefficient is real.
bool expansion_is_hermitian(std::span<const PauliString> terms) {
  std::map<std::vector<PauliAxis>, Complex> merged;
  for (const auto& term : terms) merged[term.axes] += term.coefficient;
  double scale = 0.0;
  for (const auto& [axes, c] : merged) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) return true;
  return std::all_of(merged.begin(), merged.end(), [&](const auto& entry) {
    return std::abs(entry.second.imag()) <= kHermitianTolerance * scale;
  });
}

std::vector<Complex> phase_table(const PauliString& pauli) {
  const std::uint64_t dim = std::uint64_t{1} << pauli.sites();
  std::vector<Complex> table(dim);
  for (std::uint64_t b = 0; b < dim; ++b) table[b] = pauli.phase(b);
  return table;
}

}  // namespace

char axis_symbol(PauliAxis axis) {
  switch (axis) {
    case PauliAxis::I: return '0';
    case PauliAxis::X: return 'x';
    case PauliAxis::Y: return 'y';
    case PauliAxis::Z: return 'z';
  }
  return '?';
}

PauliAxis parse_axis(char symbol) {
  switch (symbol) {
    case '0': case 'i': case 'I': return PauliAxis::I;
    case 'x': case 'X': return PauliAxis::X;
    case 'y': case 'Y': return PauliAxis::Y;
    case 'z': case 'Z': return PauliAxis::Z;
    default: break;
  }
  throw DomainError(std::string("unknown Pauli symbol '") + symbol + "'");
}

PauliString::PauliString(std::vector<PauliAxis> axes_in, Complex coefficient_in)
    : axes(std::move(axes_in)), coefficient(coefficient_in) {}

PauliString PauliString::parse(std::string_view symbols, Complex coefficient) {
  std::vector<PauliAxis> axes;
  axes.reserve(symbols.size());
  for (char c : symbols) axes.push_back(parse_axis(c));
  return PauliString(std::move(axes), coefficient);
}

PauliString PauliString::single(PauliAxis axis, int site, int sites, Complex coefficient) {
  if (site < 1 || site > sites) {
    throw IndexError("site " + std::to_string(site) + " outside 1.." + std::to_string(sites));
  }
  std::vector<PauliAxis> axes(static_cast<std::size_t>(sites), PauliAxis::I);
  axes[static_cast<std::size_t>(site - 1)] = axis;
  return PauliString(std::move(axes), coefficient);
}

bool PauliString::is_identity() const {
  return std::all_of(axes.begin(), axes.end(), [](PauliAxis a) { return a == PauliAxis::I; });
}

std::string PauliString::symbols() const {
  std::string out;
  out.reserve(axes.size());
  for (PauliAxis a : axes) out.push_back(axis_symbol(a));
  return out;
}

std::uint64_t PauliString::flip_mask() const {
  std::uint64_t mask = 0;
  const int n = sites();
  for (int k = 0; k < n; ++k) {
    if (axes[k] == PauliAxis::X || axes[k] == PauliAxis::Y) mask |= std::uint64_t{1} << (n - 1 - k);
  }
  return mask;
}

Complex PauliString::phase(std::uint64_t index) const {
  // Y|b> = i(-1)^b |1-b>, Z|b> = (-1)^b |b>.
  const int n = sites();
  std::uint64_t sign_mask = 0;
  int y_count = 0;
  for (int k = 0; k < n; ++k) {
    const std::uint64_t bit = std::uint64_t{1} << (n - 1 - k);
    if (axes[k] == PauliAxis::Y) {
      ++y_count;
      sign_mask |= bit;
    } else if (axes[k] == PauliAxis::Z) {
      sign_mask |= bit;
    }
  }
  static constexpr Complex kPowersOfI[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  Complex p = coefficient * kPowersOfI[y_count % 4];
  if (std::popcount(index & sign_mask) % 2 == 1) p = -p;
  return p;
}

void accumulate_pauli_action(const PauliString& pauli, const Matrix& in, Matrix& out) {
  const std::uint64_t dim = std::uint64_t{1} << pauli.sites();
  if (static_cast<std::uint64_t>(in.rows()) != dim || out.rows() != in.rows() ||
      out.cols() != in.cols()) {
    throw DimensionError("Pauli string on " + std::to_string(pauli.sites()) +
                         " sites cannot act on a matrix with " + std::to_string(in.rows()) +
                         " rows");
  }
  const std::uint64_t mask = pauli.flip_mask();
  const std::vector<Complex> phases = phase_table(pauli);
  for (Eigen::Index c = 0; c < in.cols(); ++c) {
    const Complex* src = in.col(c).data();
    Complex* dst = out.col(c).data();
    for (std::uint64_t b = 0; b < dim; ++b) dst[b ^ mask] += phases[b] * src[b];
  }
}

struct DenseOperator::State {
  int sites = 0;
  int dim = 1;
  std::string label;
  bool hermitian = false;
  bool has_expansion = false;
  std::vector<PauliString> expansion;
  mutable std::once_flag materialize_once;
  mutable bool materialized = false;
  mutable Matrix dense;
};

DenseOperator::DenseOperator(std::shared_ptr<State> state) : state_(std::move(state)) {}

DenseOperator::DenseOperator(Matrix entries, std::string label) {
  if (entries.rows() != entries.cols()) {
    throw DimensionError("operator matrix must be square");
  }
  auto state = std::make_shared<State>();
  state->sites = sites_from_dim(entries.rows());
  state->dim = static_cast<int>(entries.rows());
  state->label = std::move(label);
  state->hermitian = dense_is_hermitian(entries);
  state->dense = std::move(entries);
  state->materialized = true;
  std::call_once(state->materialize_once, [] {});
  state_ = std::move(state);
}

DenseOperator DenseOperator::from_pauli(std::vector<PauliString> terms, int sites,
                                        std::string label) {
  for (const auto& term : terms) {
    if (term.sites() != sites) {
      throw DimensionError("Pauli string of length " + std::to_string(term.sites()) +
                           " in an operator on " + std::to_string(sites) + " sites");
    }
  }
  if (sites < 0 || sites > 62) throw ResourceError("unsupported site count");
  auto state = std::make_shared<State>();
  state->sites = sites;
  state->dim = 1 << sites;
  state->label = std::move(label);
  state->hermitian = expansion_is_hermitian(terms);
  state->has_expansion = true;
  state->expansion = std::move(terms);
  return DenseOperator(std::move(state));
}

DenseOperator DenseOperator::identity(int sites) {
  return from_pauli({PauliString(std::vector<PauliAxis>(sites, PauliAxis::I))}, sites, "I");
}

int DenseOperator::dim() const { return state_->dim; }
int DenseOperator::sites() const { return state_->sites; }
const std::string& DenseOperator::label() const { return state_->label; }
bool DenseOperator::hermitian() const { return state_->hermitian; }
bool DenseOperator::has_pauli_expansion() const { return state_->has_expansion; }

std::span<const PauliString> DenseOperator::pauli_expansion() const {
  return state_->expansion;
}

const Matrix& DenseOperator::entries() const {
  const State& s = *state_;
  std::call_once(s.materialize_once, [&s] {
    const std::uint64_t dim = static_cast<std::uint64_t>(s.dim);
    s.dense = Matrix::Zero(s.dim, s.dim);
    for (const auto& term : s.expansion) {
      const std::uint64_t mask = term.flip_mask();
      for (std::uint64_t b = 0; b < dim; ++b) {
        s.dense(static_cast<Eigen::Index>(b ^ mask), static_cast<Eigen::Index>(b)) += term.phase(b);
      }
    }
    s.materialized = true;
  });
  return s.dense;
}

bool DenseOperator::is_materialized() const { return state_->materialized; }

DenseOperator DenseOperator::adjoint() const {
  if (has_pauli_expansion()) {
    std::vector<PauliString> terms(state_->expansion.begin(), state_->expansion.end());
    for (auto& t : terms) t.coefficient = std::conj(t.coefficient);
    return from_pauli(std::move(terms), sites(), label() + "^dag");
  }
  return DenseOperator(entries().adjoint(), label() + "^dag");
}

DenseOperator DenseOperator::with_label(std::string label) const {
  if (has_pauli_expansion()) {
    return from_pauli(state_->expansion, sites(), std::move(label));
  }
  return DenseOperator(entries(), std::move(label));
}

DenseOperator pauli_string_matrix(const PauliString& pauli, int sites, int max_sites) {
  if (pauli.sites() != sites) {
    throw DimensionError("Pauli string has " + std::to_string(pauli.sites()) +
                         " symbols, expected " + std::to_string(sites));
  }
  check_site_cap(sites, max_sites);
  return DenseOperator::from_pauli({pauli}, sites, pauli.symbols());
}

DenseOperator site_operator(PauliAxis axis, int site, int sites, int max_sites) {
  if (axis == PauliAxis::I) throw DomainError("site operator axis must be x, y or z");
  check_site_cap(sites, max_sites);
  const PauliString s = PauliString::single(axis, site, sites);
  return DenseOperator::from_pauli({s}, sites,
                                   std::string("sigma") + axis_symbol(axis) + "_" +
                                       std::to_string(site));
}

Complex normalized_trace_inner(const DenseOperator& x, const DenseOperator& y) {
  if (x.dim() != y.dim()) {
    throw DimensionError("trace inner product of operators with dims " +
                         std::to_string(x.dim()) + " and " + std::to_string(y.dim()));
  }
  if (x.has_pauli_expansion() && y.has_pauli_expansion()) {
    // tr(PQ)/d = 1 when the strings coincide and 0 otherwise.
    Complex sum = 0.0;
    for (const auto& p : x.pauli_expansion()) {
      for (const auto& q : y.pauli_expansion()) {
        if (p.same_axes(q)) sum += p.coefficient * q.coefficient;
      }
    }
    return sum;
  }
  const Matrix& a = x.entries();
  const Matrix& b = y.entries();
  Complex sum = 0.0;
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    // sum_r a(c, r) b(r, c)
    sum += (a.row(c).transpose().array() * b.col(c).array()).sum();
  }
  return sum / static_cast<double>(x.dim());
}

HamiltonianModel::HamiltonianModel(int sites, double coupling, ChainCoefficients coefficients,
                                   std::vector<DenseOperator> local_terms, DenseOperator total)
    : sites_(sites),
      coupling_(coupling),
      coefficients_(coefficients),
      local_terms_(std::move(local_terms)),
      total_(std::move(total)) {}

const DenseOperator& HamiltonianModel::local_term(int site) const {
  if (site < 1 || site > sites_) {
    throw IndexError("local term " + std::to_string(site) + " outside 1.." +
                     std::to_string(sites_));
  }
  return local_terms_[static_cast<std::size_t>(site - 1)];
}

double HamiltonianModel::local_term_square_mean() const {
  return normalized_trace_inner(local_terms_.front(), local_terms_.front()).real();
}

double HamiltonianModel::local_term_norm() const {
  const auto two_site = DenseOperator::from_pauli(
      chain_local_term(1, 2, coupling_, coefficients_), 2, "H_1");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(two_site.entries(), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

std::uint64_t HamiltonianModel::build_hash() const {
  Crc64 crc;
  auto feed = [&crc](const auto& value) {
    crc.update(std::as_bytes(std::span(&value, 1)));
  };
  feed(sites_);
  feed(coupling_);
  for (const auto& term : local_terms_) {
    for (const auto& p : term.pauli_expansion()) {
      crc.update(std::as_bytes(std::span(p.axes)));
      feed(p.coefficient);
    }
  }
  return crc.value();
}

std::vector<PauliString> chain_local_term(int site, int sites, double coupling,
                                          const ChainCoefficients& coefficients) {
  if (site < 1 || site > sites) {
    throw IndexError("site " + std::to_string(site) + " outside 1.." + std::to_string(sites));
  }
  const int next = site == sites ? 1 : site + 1;
  auto two = [&](PauliAxis a, PauliAxis b, double c) {
    std::vector<PauliAxis> axes(static_cast<std::size_t>(sites), PauliAxis::I);
    axes[static_cast<std::size_t>(site - 1)] = a;
    axes[static_cast<std::size_t>(next - 1)] = b;
    return PauliString(std::move(axes), c);
  };
  return {
      two(PauliAxis::Z, PauliAxis::Z, coefficients.zz),
      PauliString::single(PauliAxis::X, site, sites, coefficients.x),
      PauliString::single(PauliAxis::Z, site, sites, coefficients.z),
      two(PauliAxis::Y, PauliAxis::Z, coupling),
  };
}

HamiltonianModel build_chain_hamiltonian(int sites, double coupling,
                                         const ChainCoefficients& coefficients, int max_sites) {
  if (sites < 2) {
    throw DomainError("periodic chain needs at least 2 sites, got " + std::to_string(sites));
  }
  check_site_cap(sites, max_sites);
  std::vector<DenseOperator> local;
  std::vector<PauliString> all;
  local.reserve(static_cast<std::size_t>(sites));
  for (int i = 1; i <= sites; ++i) {
    auto terms = chain_local_term(i, sites, coupling, coefficients);
    all.insert(all.end(), terms.begin(), terms.end());
    local.push_back(DenseOperator::from_pauli(std::move(terms), sites, "H_" + std::to_string(i)));
  }
  auto total = DenseOperator::from_pauli(std::move(all), sites, "H");
  return HamiltonianModel(sites, coupling, coefficients, std::move(local), std::move(total));
}

void write_operator_csv(std::ostream& out, const DenseOperator& op) {
  out << "# dim=" << op.dim() << " label=" << op.label() << '\n';
  const Matrix& m = op.entries();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const Complex z = m(r, c);
      if (z == Complex{}) continue;
      out << r << ',' << c << ',' << format_number(z.real()) << ',' << format_number(z.imag()) << '\n';
    }
  }
}

}  // namespace otoc
