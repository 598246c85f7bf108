#include "otoc_lab/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <ostream>
#include <thread>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/format.hpp"
#include "otoc_lab/otoc.hpp"
#include "otoc_lab/parallel.hpp"
#include "otoc_lab/records.hpp"

namespace otoc {

namespace {

struct SizeResult {
  int sites = 0;
  bool excluded = false;
  std::string reason;
  double fn = 0.0;
  double gn = 0.0;
  double theorem_residual = 0.0;
};

bool needs_spectrum(Observable o) { return o != Observable::gn; }

double estimated_bytes(int sites, bool spectral) {
  if (!spectral) return 0.0;
  const double d = std::ldexp(1.0, sites);
  // H, eigenvectors, LAPACK workspace and three energy-basis operators.
  return 7.0 * 16.0 * d * d;
}

double leading_fn_prediction(const HamiltonianModel& model) {
  const int n = model.sites();
  const auto a = site_operator(PauliAxis::X, 1, n, n);
  double sum = 0.0;
  for (int i = 1; i <= n; ++i) sum += theory_prediction(a, site_operator(PauliAxis::X, i, n, n), model);
  return sum / n;
}

SizeResult compute_size(const SweepConfig& config, int sites, bool want_fn, bool want_theorem,
                        bool want_spectrum) {
  SizeResult out;
  out.sites = sites;
  const HamiltonianModel model = build_chain_hamiltonian(sites, config.coupling, {},
                                                         config.max_sites);
  out.gn = leading_fn_prediction(model);
  if (!want_spectrum) return out;

  auto spectral = config.cache_dir
                      ? SpectralCache(*config.cache_dir)
                            .load_or_compute(model, config.max_sites, config.warn)
                      : diagonalize(model, config.max_sites);
  const GenericityReport report =
      check_generic_spectrum(spectral.energy_span(), config.generic_tolerance, 16);
  if (!report.passed) {
    out.excluded = true;
    out.reason = "generic spectrum check failed: " + std::to_string(report.violation_count) +
                 " collisions below " + std::to_string(config.generic_tolerance);
    return out;
  }
  spectral.attach_genericity(report);
  if (want_fn) out.fn = translation_averaged_fn(spectral, sites).value.real();
  if (want_theorem) {
    const double measured = translation_averaged_hamiltonian_terms(spectral, model).value.real();
    out.theorem_residual = std::abs(measured - hamiltonian_term_prediction(model));
  }
  return out;
}

// Runs sizes largest first, admitting a new size only while the estimated
// working sets fit in the memory budget.
std::vector<SizeResult> compute_sizes(const SweepConfig& config, bool want_fn, bool want_theorem,
                                      bool want_spectrum) {
  std::vector<int> sizes;
  for (int n = config.n_min; n <= config.n_max; ++n) sizes.push_back(n);
  std::vector<SizeResult> results(sizes.size());
  if (sizes.empty()) return results;

  std::mutex mutex;
  std::condition_variable released;
  double in_use = 0.0;
  int running = 0;
  std::vector<std::size_t> order(sizes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;

  parallel_for(order.size(), config.threads, [&](std::size_t slot) {
    const std::size_t idx = order[slot];
    const double need = estimated_bytes(sizes[idx], want_spectrum);
    {
      std::unique_lock lock(mutex);
      released.wait(lock, [&] { return running == 0 || in_use + need <= config.memory_budget_bytes; });
      in_use += need;
      ++running;
    }
    struct Release {
      std::mutex& m;
      std::condition_variable& cv;
      double& in_use;
      int& running;
      double need;
      ~Release() {
        {
          std::lock_guard lock(m);
          in_use -= need;
          --running;
        }
        cv.notify_all();
      }
    } release{mutex, released, in_use, running, need};
    results[idx] = compute_size(config, sizes[idx], want_fn, want_theorem, want_spectrum);
  });
  return results;
}

}  // namespace

std::string to_string(Observable observable) {
  switch (observable) {
    case Observable::fn: return "F_n";
    case Observable::gn: return "G_n";
    case Observable::gn_minus_fn: return "G_n_minus_F_n";
    case Observable::theorem_residual: return "theorem_residual";
  }
  return "unknown";
}

Observable parse_observable(std::string_view text) {
  if (text == "fn" || text == "F_n") return Observable::fn;
  if (text == "gn" || text == "G_n") return Observable::gn;
  if (text == "gn_minus_fn" || text == "G_n_minus_F_n") return Observable::gn_minus_fn;
  if (text == "theorem_residual") return Observable::theorem_residual;
  throw DomainError("unknown observable '" + std::string(text) + "'");
}

std::vector<ScalingSeries> run_scaling_sweeps(const SweepConfig& config,
                                              const std::vector<Observable>& observables) {
  const auto wants = [&](auto pred) { return std::any_of(observables.begin(), observables.end(), pred); };
  const bool want_fn = wants([](Observable o) {
    return o == Observable::fn || o == Observable::gn_minus_fn;
  });
  const bool want_theorem = wants([](Observable o) { return o == Observable::theorem_residual; });
  const bool want_spectrum = wants(needs_spectrum);

  const std::vector<SizeResult> sizes = compute_sizes(config, want_fn, want_theorem, want_spectrum);

  std::vector<ScalingSeries> out;
  for (Observable o : observables) {
    ScalingSeries series;
    series.observable = to_string(o);
    series.coupling = config.coupling;
    for (const SizeResult& r : sizes) {
      if (needs_spectrum(o) && r.excluded) {
        series.excluded.push_back({r.sites, r.reason});
        continue;
      }
      double value = 0.0;
      switch (o) {
        case Observable::fn: value = r.fn; break;
        case Observable::gn: value = r.gn; break;
        case Observable::gn_minus_fn: value = r.gn - r.fn; break;
        case Observable::theorem_residual: value = r.theorem_residual; break;
      }
      series.points.push_back({r.sites, value, 0.0});
    }
    out.push_back(std::move(series));
  }
  return out;
}

ScalingSeries run_scaling_sweep(const SweepConfig& config, Observable observable) {
  return run_scaling_sweeps(config, {observable}).front();
}

ScalingSeries theorem_residual_series(const SweepConfig& config) {
  return run_scaling_sweep(config, Observable::theorem_residual);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("line fit needs as many x as y values");
  if (x.size() < 2) throw InsufficientDataError("a line fit needs at least 2 points");
  const double count = static_cast<double>(x.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= count;
  mean_y /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
  }
  if (sxx == 0.0) throw InsufficientDataError("a line fit needs distinct x values");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sq += r * r;
  }
  fit.rms_residual = std::sqrt(sq / count);
  return fit;
}

PowerLawFit power_law_fit(const ScalingSeries& series, std::size_t tail) {
  if (tail < 3) throw InsufficientDataError("a power-law fit needs at least 3 points");
  if (tail > series.points.size()) {
    throw InsufficientDataError("fit tail of " + std::to_string(tail) + " exceeds the " +
                                std::to_string(series.points.size()) + " available points");
  }
  const auto first = series.points.end() - static_cast<std::ptrdiff_t>(tail);
  std::vector<double> xs;
  std::vector<double> ys;
  for (auto it = first; it != series.points.end(); ++it) {
    if (!(it->value > 0.0)) {
      throw DomainError("nonpositive value " + std::to_string(it->value) + " at n=" +
                        std::to_string(it->sites) + " in " + series.observable);
    }
    xs.push_back(std::log(static_cast<double>(it->sites)));
    ys.push_back(std::log(it->value));
  }
  const LineFit line = fit_line(xs, ys);
  PowerLawFit fit;
  fit.amplitude = std::exp(line.intercept);
  fit.exponent = -line.slope;
  fit.n_min = first->sites;
  fit.n_max = series.points.back().sites;
  fit.rms_log_residual = line.rms_residual;
  fit.points = tail;
  return fit;
}

void write_series_csv(std::ostream& out, const ScalingSeries& series, std::uint64_t seed) {
  out << "# observable=" << series.observable << " g=" << format_number(series.coupling) << " seed=" << seed
      << " version=" << version() << '\n';
  out << "n,value,error\n";
  for (const auto& p : series.points) {
    out << p.sites << ',' << format_number(p.value) << ',' << format_number(p.error) << '\n';
  }
}

}  // namespace otoc
