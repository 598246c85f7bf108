#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace otoc {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

// Largest chain that may be materialized densely unless a caller raises it.
inline constexpr int kDefaultMaxSites = 14;

enum class PauliAxis : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

char axis_symbol(PauliAxis axis);
PauliAxis parse_axis(char symbol);

// Tensor product of single-site Pauli matrices times a coefficient.
// axes[0] is site 1, which is the most significant bit of a basis index, so
// the string "xz" is the Kronecker product sigma^x (x) sigma^z.
struct PauliString {
  std::vector<PauliAxis> axes;
  Complex coefficient{1.0, 0.0};

  PauliString() = default;
  PauliString(std::vector<PauliAxis> axes, Complex coefficient = 1.0);

  // Parses symbols from {0, i, x, y, z} (case-insensitive), e.g. "0zx".
  static PauliString parse(std::string_view symbols, Complex coefficient = 1.0);
  // Single Pauli on a 1-based site; every other site is the identity.
  static PauliString single(PauliAxis axis, int site, int sites, Complex coefficient = 1.0);

  int sites() const { return static_cast<int>(axes.size()); }
  bool is_identity() const;
  bool same_axes(const PauliString& other) const { return axes == other.axes; }
  std::string symbols() const;

  // Bits flipped by the string when acting on a computational basis state.
  std::uint64_t flip_mask() const;
  // Phase picked up by basis state `index`: P|index> = phase(index)|index ^ flip_mask()>,
  // coefficient included.
  Complex phase(std::uint64_t index) const;
};

// out += P * in, for P acting on the row index of `in`. Costs O(rows * cols).
void accumulate_pauli_action(const PauliString& pauli, const Matrix& in, Matrix& out);

// A d x d complex operator in the computational basis (d = 2^n). When it was
// built from Pauli strings the expansion is kept and the dense matrix is only
// materialized on first access, so large chains can be handled symbolically.
// Copies share the same immutable state.
class DenseOperator {
 public:
  DenseOperator(Matrix entries, std::string label);

  static DenseOperator from_pauli(std::vector<PauliString> terms, int sites, std::string label);
  static DenseOperator identity(int sites);

  int dim() const;
  int sites() const;
  const std::string& label() const;
  bool hermitian() const;

  // Dense matrix; built from the Pauli expansion on first call.
  const Matrix& entries() const;
  bool is_materialized() const;

  bool has_pauli_expansion() const;
  std::span<const PauliString> pauli_expansion() const;

  DenseOperator adjoint() const;
  DenseOperator with_label(std::string label) const;

 private:
  struct State;
  explicit DenseOperator(std::shared_ptr<State> state);
  std::shared_ptr<State> state_;
};

DenseOperator pauli_string_matrix(const PauliString& pauli, int sites,
                                  int max_sites = kDefaultMaxSites);

DenseOperator site_operator(PauliAxis axis, int site, int sites,
                            int max_sites = kDefaultMaxSites);

// tr(XY)/d. Evaluated symbolically from Pauli orthogonality when both
// operands carry an expansion; otherwise by an O(d^2) dense contraction.
Complex normalized_trace_inner(const DenseOperator& x, const DenseOperator& y);

// Coefficients of the translation-invariant chain
//   H_i = zz * Z_i Z_{i+1} + x * X_i + z * Z_i + g * Y_i Z_{i+1}
struct ChainCoefficients {
  double zz = 1.0;
  double x = -1.05;
  double z = 0.5;
};

// Periodic spin-1/2 chain. Local term H_i owns the Pauli strings that start
// at site i, so distinct terms are Hilbert-Schmidt orthogonal for n >= 3.
class HamiltonianModel {
 public:
  HamiltonianModel(int sites, double coupling, ChainCoefficients coefficients,
                   std::vector<DenseOperator> local_terms, DenseOperator total);

  int sites() const { return sites_; }
  double coupling() const { return coupling_; }
  const ChainCoefficients& coefficients() const { return coefficients_; }

  const std::vector<DenseOperator>& local_terms() const { return local_terms_; }
  // 1-based.
  const DenseOperator& local_term(int site) const;
  const DenseOperator& total() const { return total_; }

  // <H_i^2>, identical for every i.
  double local_term_square_mean() const;
  // Operator norm of a single local term; the model is not rescaled to make
  // this at most one.
  double local_term_norm() const;
  // CRC-64 over the Pauli content; distinguishes models in cache tags.
  std::uint64_t build_hash() const;

 private:
  int sites_;
  double coupling_;
  ChainCoefficients coefficients_;
  std::vector<DenseOperator> local_terms_;
  DenseOperator total_;
};

std::vector<PauliString> chain_local_term(int site, int sites, double coupling,
                                          const ChainCoefficients& coefficients = {});

HamiltonianModel build_chain_hamiltonian(int sites, double coupling,
                                         const ChainCoefficients& coefficients = {},
                                         int max_sites = kDefaultMaxSites);

// Debug dump: "# dim=<d> label=<text>" followed by one "row,col,re,im" line
// per nonzero entry (0-based computational basis indices).
void write_operator_csv(std::ostream& out, const DenseOperator& op);

}  // namespace otoc
