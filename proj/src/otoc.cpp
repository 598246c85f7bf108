#include "otoc_lab/otoc.hpp"

#include <array>
#include <cmath>
#include <random>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/linalg.hpp"
#include "otoc_lab/parallel.hpp"
#include "otoc_lab/summation.hpp"

namespace otoc {

namespace {

using Operands = std::array<const EnergyBasisOperator*, 4>;

void check_basis(const SpectralData& spectral, const Operands& ops) {
  for (const EnergyBasisOperator* op : ops) {
    if (op == nullptr) throw ContractError("OTOC query is missing an operator");
    if (op->dim() != spectral.dim() || !(op->tag == spectral.tag())) {
      throw ContractError("operator '" + op->source_label +
                          "' is not expressed in the query's energy basis");
    }
  }
}

void require_generic(const SpectralData& spectral) {
  if (!spectral.generic_certified()) {
    throw AssumptionError(
        "generic-spectrum assumption (E_p + E_r = E_q + E_s only for trivial index "
        "pairings) has not been verified for this spectrum; run the genericity check first");
  }
}

Operands operands(const OtocQuery& q) { return {q.a.get(), q.b.get(), q.c.get(), q.d.get()}; }

// tr(XY) for square X, Y.
Complex trace_of_product(const Matrix& x, const Matrix& y) {
  return (x.array() * y.transpose().array()).sum();
}

Complex closed_form_value(const Operands& ops) {
  const Matrix& a = ops[0]->entries;
  const Matrix& b = ops[1]->entries;
  const Matrix& c = ops[2]->entries;
  const Matrix& d = ops[3]->entries;
  const Eigen::Index dim = a.rows();
  std::vector<Complex> first(static_cast<std::size_t>(dim));
  std::vector<Complex> second(static_cast<std::size_t>(dim));
  std::vector<Complex> third(static_cast<std::size_t>(dim));
  for (Eigen::Index k = 0; k < dim; ++k) {
    Complex s1 = 0.0;
    Complex s2 = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      s1 += a(j, j) * b(j, k) * d(k, j);
      s2 += d(j, j) * a(j, k) * c(k, j);
    }
    first[static_cast<std::size_t>(k)] = s1 * c(k, k);
    second[static_cast<std::size_t>(k)] = s2 * b(k, k);
    third[static_cast<std::size_t>(k)] = a(k, k) * b(k, k) * c(k, k) * d(k, k);
  }
  const auto sum = [](const std::vector<Complex>& v) {
    return pairwise_sum(std::span<const Complex>(v));
  };
  return (sum(first) + sum(second) - sum(third)) / static_cast<double>(dim);
}

Complex eigenstate_value(const Operands& ops) {
  const Matrix& a = ops[0]->entries;
  const Matrix& b = ops[1]->entries;
  const Matrix& c = ops[2]->entries;
  const Matrix& d = ops[3]->entries;
  const Eigen::Index dim = a.rows();
  // (AC)_jj = sum_k A_jk C_kj
  Eigen::VectorXcd ac = Eigen::VectorXcd::Zero(dim);
  Eigen::VectorXcd bd = Eigen::VectorXcd::Zero(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      ac(j) += a(j, k) * c(k, j);
      bd(j) += b(j, k) * d(k, j);
    }
  }
  std::vector<Complex> terms(static_cast<std::size_t>(dim));
  for (Eigen::Index j = 0; j < dim; ++j) {
    terms[static_cast<std::size_t>(j)] = ac(j) * b(j, j) * d(j, j) + a(j, j) * c(j, j) * bd(j) -
                                         a(j, j) * b(j, j) * c(j, j) * d(j, j);
  }
  return pairwise_sum(std::span<const Complex>(terms)) / static_cast<double>(dim);
}

Complex value_at_time(const SpectralData& spectral, const Operands& ops, double t) {
  const Eigen::VectorXd& e = spectral.energies();
  const Eigen::VectorXcd phase =
      e.unaryExpr([t](double energy) { return std::polar(1.0, energy * t); });
  const auto heisenberg = [&](const Matrix& x) -> Matrix {
    return phase.asDiagonal() * x * phase.conjugate().asDiagonal();
  };
  const Eigen::Index dim = e.size();
  Matrix left;
  multiply_into(left, ops[0]->entries, Op::none, heisenberg(ops[1]->entries), Op::none);
  Matrix right;
  multiply_into(right, ops[2]->entries, Op::none, heisenberg(ops[3]->entries), Op::none);
  return trace_of_product(left, right) / static_cast<double>(dim);
}

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

void OtocQuery::validate() const {
  if (!spectral) throw ContractError("OTOC query has no spectral data");
  check_basis(*spectral, operands(*this));
}

std::string OtocQuery::operator_labels() const {
  std::string out;
  for (const EnergyBasisOperator* op : operands(*this)) {
    if (!out.empty()) out += ',';
    out += op ? op->source_label : std::string("?");
  }
  return out;
}

std::string to_string(OtocRoute route) {
  switch (route) {
    case OtocRoute::sampled: return "sampled";
    case OtocRoute::generic_closed_form: return "generic_closed_form";
    case OtocRoute::eigenstate_formula: return "eigenstate_formula";
    case OtocRoute::theory_prediction: return "theory_prediction";
  }
  return "unknown";
}

Complex otoc_at_time(const OtocQuery& query, double t) {
  query.validate();
  return value_at_time(*query.spectral, operands(query), t);
}

double effective_window(const TimeSampler& sampler, const SpectralData& spectral) {
  double window = sampler.window;
  const auto frequency = spectral.smallest_frequency();
  if (sampler.widen_to_spectrum && frequency) {
    window = std::max(window, std::min(kMaxWindow, kWindowCycles / *frequency));
  }
  return window;
}

OtocEstimate sampled_infinite_time_average(const OtocQuery& query, const TimeSampler& sampler,
                                           const SamplingOptions& options) {
  query.validate();
  if (!(options.target_std_error > 0.0)) throw DomainError("target standard error must be > 0");
  if (options.max_samples < 2) throw DomainError("sampling needs at least 2 samples");
  const SpectralData& spectral = *query.spectral;
  const Operands ops = operands(query);

  if (!(sampler.window > 0.0)) throw DomainError("sampling window must be positive");
  const double window = effective_window(sampler, spectral);
  std::mt19937_64 rng(sampler.seed);
  std::vector<Complex> values;
  values.reserve(static_cast<std::size_t>(std::min<std::int64_t>(options.max_samples, 1 << 20)));
  const std::int64_t min_samples =
      std::min(options.max_samples, std::max<std::int64_t>(2, options.min_samples));
  const std::int64_t batch_size = std::max<std::int64_t>(1, options.batch_size);

  OtocEstimate estimate;
  estimate.route = OtocRoute::sampled;
  estimate.window = window;
  while (static_cast<std::int64_t>(values.size()) < options.max_samples) {
    const std::int64_t batch = std::min<std::int64_t>(
        batch_size, options.max_samples - static_cast<std::int64_t>(values.size()));
    const std::size_t offset = values.size();
    std::vector<double> times(static_cast<std::size_t>(batch));
    for (double& t : times) t = sampler.burn_in + window * uniform_unit(rng);
    values.resize(offset + times.size());
    parallel_for(times.size(), options.threads, [&](std::size_t i) {
      values[offset + i] = value_at_time(spectral, ops, times[i]);
    });

    const auto n = static_cast<std::int64_t>(values.size());
    if (n < min_samples) continue;
    const Complex mean = pairwise_sum(std::span<const Complex>(values)) / static_cast<double>(n);
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = std::norm(values[i] - mean);
    const double variance =
        pairwise_sum(std::span<const double>(sq)) / static_cast<double>(n - 1);
    estimate.value = mean;
    estimate.std_error = std::sqrt(variance / static_cast<double>(n));
    estimate.samples = n;
    if (estimate.std_error <= options.target_std_error) break;
  }
  estimate.converged = estimate.std_error <= options.target_std_error;
  return estimate;
}

OtocEstimate generic_closed_form_average(const OtocQuery& query) {
  query.validate();
  require_generic(*query.spectral);
  OtocEstimate estimate;
  estimate.route = OtocRoute::generic_closed_form;
  estimate.value = closed_form_value(operands(query));
  return estimate;
}

OtocEstimate eigenstate_formula_average(const OtocQuery& query) {
  query.validate();
  OtocEstimate estimate;
  estimate.route = OtocRoute::eigenstate_formula;
  estimate.value = eigenstate_value(operands(query));
  return estimate;
}

double theory_prediction(const DenseOperator& a, const DenseOperator& b,
                         const HamiltonianModel& model) {
  const DenseOperator& h = model.total();
  if (a.dim() != h.dim() || b.dim() != h.dim()) {
    throw DimensionError("theory prediction operands must match the model dimension");
  }
  const DenseOperator identity = DenseOperator::identity(model.sites());
  for (const DenseOperator* op : {&a, &b}) {
    if (std::abs(normalized_trace_inner(*op, identity)) > 1e-10) {
      throw DomainError("theory prediction needs traceless operators; '" + op->label() +
                        "' is not");
    }
  }
  const double h_hi = normalized_trace_inner(h, model.local_term(1)).real();
  if (std::abs(h_hi) < 1e-14) throw DegenerateModelError("<H H_i> vanishes for this model");
  const double bb = normalized_trace_inner(b, b.adjoint()).real();
  const double aa = normalized_trace_inner(a, a.adjoint()).real();
  const double ha = std::norm(normalized_trace_inner(h, a));
  const double hb = std::norm(normalized_trace_inner(h, b));
  return (bb * ha + aa * hb) / (h_hi * model.sites());
}

double hamiltonian_term_prediction(const HamiltonianModel& model) {
  const double square_mean = model.local_term_square_mean();
  return 2.0 * square_mean * square_mean / model.sites();
}

TranslationAverage translation_average(const SpectralData& spectral, int sites,
                                       const std::vector<PauliString>& fixed,
                                       const SiteOperatorFactory& moving,
                                       const std::string& label) {
  require_generic(spectral);
  if (spectral.dim() != (1 << sites)) {
    throw DimensionError("spectrum does not belong to a " + std::to_string(sites) +
                         "-site chain");
  }
  const EnergyBasisOperator a = to_energy_basis(fixed, spectral, label + ":fixed");
  std::vector<Complex> closed(static_cast<std::size_t>(sites));
  std::vector<Complex> eigen(static_cast<std::size_t>(sites));
  for (int i = 1; i <= sites; ++i) {
    const EnergyBasisOperator b =
        to_energy_basis(moving(i), spectral, label + ":site" + std::to_string(i));
    const Operands ops{&a, &b, &a, &b};
    check_basis(spectral, ops);
    closed[static_cast<std::size_t>(i - 1)] = closed_form_value(ops);
    eigen[static_cast<std::size_t>(i - 1)] = eigenstate_value(ops);
  }
  TranslationAverage out;
  out.closed_form.route = OtocRoute::generic_closed_form;
  out.closed_form.value = pairwise_sum(std::span<const Complex>(closed)) / double(sites);
  out.eigenstate_formula.route = OtocRoute::eigenstate_formula;
  out.eigenstate_formula.value = pairwise_sum(std::span<const Complex>(eigen)) / double(sites);
  return out;
}

OtocEstimate translation_averaged_fn(const SpectralData& spectral, int sites) {
  return translation_average(
             spectral, sites, {PauliString::single(PauliAxis::X, 1, sites)},
             [sites](int i) {
               return std::vector<PauliString>{PauliString::single(PauliAxis::X, i, sites)};
             },
             "F_n")
      .closed_form;
}

OtocEstimate translation_averaged_hamiltonian_terms(const SpectralData& spectral,
                                                    const HamiltonianModel& model) {
  const int n = model.sites();
  const double g = model.coupling();
  const ChainCoefficients coefficients = model.coefficients();
  return translation_average(
             spectral, n, chain_local_term(1, n, g, coefficients),
             [&](int i) { return chain_local_term(i, n, g, coefficients); }, "H_terms")
      .closed_form;
}

}  // namespace otoc
