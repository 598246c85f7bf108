#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otoc_lab/spectral_cache.hpp"

namespace otoc {

enum class Observable { fn, gn, gn_minus_fn, theorem_residual };

std::string to_string(Observable observable);
// Accepts fn, gn, gn_minus_fn, theorem_residual and the F_n / G_n spellings.
Observable parse_observable(std::string_view text);

inline constexpr std::size_t kDefaultFitTail = 5;

struct SweepConfig {
  int n_min = 5;
  int n_max = 12;
  double coupling = 0.1;
  double generic_tolerance = kDefaultGenericTolerance;
  // No caching when empty.
  std::optional<std::filesystem::path> cache_dir;
  unsigned threads = 0;
  // Sizes are processed concurrently only while their estimated working sets
  // fit in this budget; the largest size always runs alone.
  double memory_budget_bytes = 4e9;
  int max_sites = kDefaultMaxSites;
  std::uint64_t seed = 0;
  WarningSink warn;
};

struct SeriesPoint {
  int sites = 0;
  double value = 0.0;
  double error = 0.0;
};

struct ExcludedPoint {
  int sites = 0;
  std::string reason;
};

struct ScalingSeries {
  std::vector<SeriesPoint> points;  // strictly increasing n
  std::vector<ExcludedPoint> excluded;
  std::string observable;
  double coupling = 0.0;
};

// value ~ amplitude * n^(-exponent), fitted on (log n, log value).
struct PowerLawFit {
  double amplitude = 0.0;
  double exponent = 0.0;
  int n_min = 0;
  int n_max = 0;
  double rms_log_residual = 0.0;
  std::size_t points = 0;
};

// Ordinary least-squares line y ~ intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};

// Throws InsufficientDataError for fewer than two points or a single
// distinct x, and DimensionError when the lengths differ.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

ScalingSeries run_scaling_sweep(const SweepConfig& config, Observable observable);

// Several observables from one pass; each size is diagonalized once.
std::vector<ScalingSeries> run_scaling_sweeps(const SweepConfig& config,
                                              const std::vector<Observable>& observables);

// |(1/n) sum_i late-time <H_1 H_i(t) H_1 H_i(t)> - 2 <H_i^2>^2 / n| per size.
ScalingSeries theorem_residual_series(const SweepConfig& config);

// Fits the last `tail` points. Throws InsufficientDataError for tail < 3 or
// tail > size, and DomainError naming the first nonpositive value.
PowerLawFit power_law_fit(const ScalingSeries& series, std::size_t tail = kDefaultFitTail);

// "# observable=<label> g=<g> seed=<s> version=<v>", "n,value,error", rows.
void write_series_csv(std::ostream& out, const ScalingSeries& series, std::uint64_t seed);

}  // namespace otoc
