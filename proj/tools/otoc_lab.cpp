#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/eth.hpp"
#include "otoc_lab/format.hpp"
#include "otoc_lab/haar.hpp"
#include "otoc_lab/operators.hpp"
#include "otoc_lab/otoc.hpp"
#include "otoc_lab/records.hpp"
#include "otoc_lab/scaling.hpp"
#include "otoc_lab/spectral.hpp"
#include "otoc_lab/spectral_cache.hpp"
#include "otoc_lab/verification.hpp"

namespace {

using nlohmann::json;
using namespace otoc;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr std::uint64_t kDefaultSeed = 20240607;
constexpr int kDefaultSweepMax = 12;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string n;
  std::string n_range;
  double g = 0.1;
  std::uint64_t seed = kDefaultSeed;
  double tol_generic = kDefaultGenericTolerance;
  double target_se = 1e-4;
  std::int64_t max_samples = 100000;
  std::size_t tail = kDefaultFitTail;
  std::string cache_dir;
  bool no_cache = false;
  unsigned threads = 0;
  int max_sites = kDefaultMaxSites;
  std::string output;
  std::string format = "json";
  std::string config;
  bool json_diagnostics = false;
  bool list_energies = false;

  std::string a = "x1";
  std::string b = "x1";
  std::string c;
  std::string d;
  std::string route = "closed-form";
  double burn_in = 1e2;
  double window = 1e4;
  bool fixed_window = false;

  int dim = 2;
  std::int64_t samples = 100000;
  std::string preset = "sigmax";
  double z_limit = 3.0;

  std::string op = "x1";
  double fit_window = kDefaultFitWindow;
  std::string profile_dir;

  double eps = 0.0;
  std::string gaps = "1..8";

  std::vector<std::string> observables{"fn"};
  bool allow_large = false;
  double memory_gb = 4.0;

  std::vector<int> criteria;
  double sweep_tol_generic = kPrecisionGenericTolerance;
  bool quiet = false;
};

// Failures and warnings go to stderr, either as text or as one JSON object
// per line.
class Diagnostics {
 public:
  explicit Diagnostics(bool as_json) : as_json_(as_json) {}

  void warning(const std::string& message) const {
    if (as_json_) {
      std::cerr << json{{"level", "warning"}, {"message", message}}.dump() << '\n';
    } else {
      std::cerr << "otoc-lab: warning: " << message << '\n';
    }
  }

  int fail(int code, const std::string& kind, const std::string& message,
           const json& details = nullptr) const {
    if (as_json_) {
      json out{{"level", "error"}, {"kind", kind}, {"exit_code", code}, {"message", message}};
      if (!details.is_null()) out["details"] = details;
      std::cerr << out.dump() << '\n';
    } else {
      std::cerr << "otoc-lab: " << (code == kExitCheckFailed ? "check failed" : "error") << ": "
                << message << '\n';
    }
    return code;
  }

  WarningSink sink() const {
    return [this](const std::string& message) { warning(message); };
  }

 private:
  bool as_json_;
};

struct SizeRange {
  int lo = 0;
  int hi = 0;

  std::string text() const {
    return lo == hi ? std::to_string(lo) : std::to_string(lo) + ".." + std::to_string(hi);
  }
};

int parse_int(const std::string& text, const std::string& flag) {
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw UsageError(flag + ": '" + text + "' is not an integer");
  }
  return value;
}

// "A" or "A..B" with 1 <= A <= B.
SizeRange parse_range(const std::string& text, const std::string& flag) {
  SizeRange range;
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    range.lo = range.hi = parse_int(text, flag);
  } else {
    range.lo = parse_int(text.substr(0, dots), flag);
    range.hi = parse_int(text.substr(dots + 2), flag);
  }
  if (range.lo < 1 || range.hi < range.lo) {
    throw UsageError(flag + ": '" + text + "' is not a range A..B with 1 <= A <= B");
  }
  return range;
}

SizeRange resolve_sizes(const Options& o, const std::string& fallback) {
  if (!o.n_range.empty()) return parse_range(o.n_range, "--n-range");
  if (!o.n.empty()) return parse_range(o.n, "--n");
  if (fallback.empty()) throw UsageError("--n is required");
  return parse_range(fallback, "--n");
}

int resolve_single_size(const Options& o, const std::string& fallback) {
  const SizeRange range = resolve_sizes(o, fallback);
  if (range.lo != range.hi) throw UsageError("this subcommand takes a single --n");
  return range.lo;
}

struct OperatorSpec {
  std::vector<PauliString> terms;
  std::string label;
};

// x<k>, y<k>, z<k>: single-site Pauli on 1-based site k. h<k>: local term
// H_k. Anything else is read as a full Pauli string of length n.
OperatorSpec parse_operator(const std::string& text, int sites, double coupling) {
  static const std::regex site_form("([xyzhXYZH])([0-9]+)");
  std::smatch match;
  if (std::regex_match(text, match, site_form) && std::stoi(match[2].str()) >= 1) {
    const int site = std::stoi(match[2].str());
    if (site > sites) {
      throw UsageError("operator '" + text + "' names site " + std::to_string(site) +
                       " but the chain has " + std::to_string(sites) + " sites");
    }
    const char symbol = static_cast<char>(std::tolower(match[1].str()[0]));
    if (symbol == 'h') {
      return {chain_local_term(site, sites, coupling), "H_" + std::to_string(site)};
    }
    return {{PauliString::single(parse_axis(symbol), site, sites)},
            std::string("sigma^") + symbol + "_" + std::to_string(site)};
  }
  PauliString pauli = PauliString::parse(text);
  if (pauli.sites() != sites) {
    throw UsageError("Pauli string '" + text + "' has length " + std::to_string(pauli.sites()) +
                     " but the chain has " + std::to_string(sites) + " sites");
  }
  std::string label = pauli.symbols();
  return {{std::move(pauli)}, std::move(label)};
}

std::optional<std::filesystem::path> cache_flag(const Options& o) {
  if (o.cache_dir.empty()) return std::nullopt;
  return std::filesystem::path(o.cache_dir);
}

std::optional<std::filesystem::path> cache_location(const Options& o) {
  if (o.no_cache) return std::nullopt;
  return resolve_cache_directory(cache_flag(o));
}

SpectralData load_spectrum(const HamiltonianModel& model, const Options& o,
                           const Diagnostics& diag) {
  const auto directory = cache_location(o);
  if (!directory) return diagonalize(model, o.max_sites);
  return SpectralCache(*directory).load_or_compute(model, o.max_sites, diag.sink());
}

// Metadata embedded in every artifact. The config hash covers only settings
// that change results (not output paths, caching or thread counts).
class Run {
 public:
  explicit Run(json config) : config_(std::move(config)), start_(Clock::now()) {
    hash_ = config_hash(config_.dump());
  }

  std::uint64_t seed() const { return config_.value("seed", std::uint64_t{0}); }
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  json metadata() const {
    return {{"tool", "otoc-lab"},   {"version", version()},     {"config_hash", hash_},
            {"seed", seed()},       {"wall_time_s", elapsed()}, {"config", config_}};
  }

  std::string csv_comment() const {
    std::ostringstream out;
    out << "# tool=otoc-lab version=" << version() << " command=" << config_.value("command", "")
        << " config_hash=" << hash_ << " seed=" << seed() << " wall_time_s=" << format_number(elapsed()) << '\n';
    return out.str();
  }

 private:
  using Clock = std::chrono::steady_clock;
  json config_;
  Clock::time_point start_;
  std::string hash_;
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw UsageError("failed writing '" + path.string() + "'");
}

void emit(const Options& o, const std::string& text) {
  if (o.output.empty() || o.output == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    write_file(o.output, text);
  }
}

void emit_json(const Options& o, const Run& run, const std::string& key, const json& payload) {
  json out{{"meta", run.metadata()}, {key, payload}};
  emit(o, out.dump(2) + "\n");
}

json base_config(const std::string& command, const Options& o) {
  return {{"command", command}, {"g", o.g}, {"seed", o.seed}, {"max_sites", o.max_sites}};
}

int run_spectrum(const Options& o, const Diagnostics& diag) {
  const SizeRange sizes = resolve_sizes(o, "");
  json config = base_config("spectrum", o);
  config["n"] = sizes.text();
  config["tol_generic"] = o.tol_generic;
  const Run run(config);

  json results = json::array();
  std::vector<std::string> failed;
  std::ostringstream csv;
  csv << "n,g,dim,passed,tolerance,violation_count,near_miss_count,degenerate_pairs,"
         "smallest_gap,energy_min,energy_max\n";
  for (int n = sizes.lo; n <= sizes.hi; ++n) {
    const HamiltonianModel model = build_chain_hamiltonian(n, o.g, {}, o.max_sites);
    const SpectralData spectral = load_spectrum(model, o, diag);
    const auto energies = spectral.energy_span();
    const GenericityReport report = check_generic_spectrum(energies, o.tol_generic);
    std::size_t degenerate = 0;
    for (std::size_t j = 0; j + 1 < energies.size(); ++j) {
      if (energies[j + 1] - energies[j] < o.tol_generic) ++degenerate;
    }
    json record = genericity_record(report, n, o.g);
    record["dim"] = spectral.dim();
    record["degenerate_pairs"] = degenerate;
    record["energy_min"] = energies.front();
    record["energy_max"] = energies.back();
    if (o.list_energies) record["energies"] = std::vector<double>(energies.begin(), energies.end());
    results.push_back(record);
    if (!report.passed) failed.push_back(std::to_string(n));
    csv << n << ',' << format_number(o.g) << ',' << spectral.dim() << ','
        << (report.passed ? "true" : "false") << ',' << format_number(o.tol_generic) << ','
        << report.violation_count << ',' << report.near_miss_count << ',' << degenerate << ','
        << format_number(report.smallest_gap) << ',' << format_number(energies.front()) << ','
        << format_number(energies.back()) << '\n';
  }
  if (o.format == "csv") {
    emit(o, run.csv_comment() + csv.str());
  } else {
    emit_json(o, run, "spectra", results);
  }
  if (failed.empty()) return kExitOk;
  std::string list;
  for (const auto& n : failed) list += (list.empty() ? "" : ", ") + n;
  json details = json::array();
  for (const auto& record : results) {
    if (!record["passed"].get<bool>()) {
      details.push_back({{"n", record["n"]},
                         {"violation_count", record["violation_count"]},
                         {"degenerate_pairs", record["degenerate_pairs"]},
                         {"violations", record["violations"]}});
    }
  }
  return diag.fail(kExitCheckFailed, "non_generic_spectrum",
                   "spectrum not generic at tolerance " + format_number(o.tol_generic) + " for n = " +
                       list,
                   details);
}

int run_otoc(const Options& o, const Diagnostics& diag) {
  const int n = resolve_single_size(o, "6");
  const std::string c_text = o.c.empty() ? o.a : o.c;
  const std::string d_text = o.d.empty() ? o.b : o.d;
  json config = base_config("otoc", o);
  config["n"] = n;
  config["operators"] = {o.a, o.b, c_text, d_text};
  config["route"] = o.route;
  if (o.route == "closed-form") config["tol_generic"] = o.tol_generic;
  if (o.route == "sampled") {
    config["target_se"] = o.target_se;
    config["max_samples"] = o.max_samples;
    config["burn_in"] = o.burn_in;
    config["window"] = o.window;
    config["fixed_window"] = o.fixed_window;
  }
  const Run run(config);

  const HamiltonianModel model = build_chain_hamiltonian(n, o.g, {}, o.max_sites);
  OtocEstimate estimate;
  std::string labels;
  if (o.route == "theory") {
    if (c_text != o.a || d_text != o.b) {
      throw UsageError("the theory route evaluates <A B(t) A^dag B^dag(t)>; omit --c and --d");
    }
    const OperatorSpec a = parse_operator(o.a, n, o.g);
    const OperatorSpec b = parse_operator(o.b, n, o.g);
    estimate.route = OtocRoute::theory_prediction;
    estimate.value = theory_prediction(DenseOperator::from_pauli(a.terms, n, a.label),
                                       DenseOperator::from_pauli(b.terms, n, b.label), model);
    labels = a.label + "," + b.label + "," + a.label + "^dag," + b.label + "^dag";
  } else {
    auto spectral = std::make_shared<SpectralData>(load_spectrum(model, o, diag));
    const GenericityReport report = check_generic_spectrum(spectral->energy_span(), o.tol_generic, 16);
    spectral->attach_genericity(report);
    std::vector<std::pair<std::string, std::shared_ptr<const EnergyBasisOperator>>> built;
    auto basis_operator = [&](const std::string& text) {
      for (const auto& [key, op] : built) {
        if (key == text) return op;
      }
      const OperatorSpec spec = parse_operator(text, n, o.g);
      auto op = std::make_shared<const EnergyBasisOperator>(
          to_energy_basis(spec.terms, *spectral, spec.label));
      built.emplace_back(text, op);
      return op;
    };
    const OtocQuery query{spectral, basis_operator(o.a), basis_operator(o.b),
                          basis_operator(c_text), basis_operator(d_text)};
    labels = query.operator_labels();
    if (o.route == "closed-form") {
      if (!report.passed) {
        return diag.fail(kExitCheckFailed, "non_generic_spectrum",
                         "closed form needs a generic spectrum but " +
                             std::to_string(report.violation_count) + " collisions lie below " +
                             format_number(o.tol_generic),
                         genericity_record(report, n, o.g, 16));
      }
      estimate = generic_closed_form_average(query);
    } else if (o.route == "eigenstate") {
      estimate = eigenstate_formula_average(query);
    } else {
      SamplingOptions sampling;
      sampling.target_std_error = o.target_se;
      sampling.max_samples = o.max_samples;
      sampling.threads = o.threads;
      const TimeSampler sampler{o.burn_in, o.window, o.seed, !o.fixed_window};
      estimate = sampled_infinite_time_average(query, sampler, sampling);
      if (!estimate.converged) {
        diag.warning("sampling stopped at the cap of " + std::to_string(o.max_samples) +
                     " samples with standard error " + format_number(estimate.std_error));
      }
    }
  }

  const OtocRecordContext context{n, o.g, labels, o.seed, run.elapsed()};
  if (o.format == "csv") {
    emit(o, run.csv_comment() + otoc_csv_header() + "\n" + otoc_csv_row(estimate, context) + "\n");
  } else {
    emit_json(o, run, "result", otoc_record(estimate, context));
  }
  return kExitOk;
}

SweepConfig sweep_config(const Options& o, const SizeRange& sizes, const Diagnostics& diag) {
  if (sizes.hi > kDefaultSweepMax && !o.allow_large) {
    throw UsageError("sizes above n = " + std::to_string(kDefaultSweepMax) +
                     " need --allow-large (at least 8 GB of memory and hours of runtime)");
  }
  SweepConfig config;
  config.n_min = sizes.lo;
  config.n_max = sizes.hi;
  config.coupling = o.g;
  config.generic_tolerance = o.tol_generic;
  config.cache_dir = cache_location(o);
  config.threads = o.threads;
  config.memory_budget_bytes = o.memory_gb * 1e9;
  config.max_sites = o.max_sites;
  config.seed = o.seed;
  config.warn = diag.sink();
  return config;
}

json excluded_json(const ScalingSeries& series) {
  json out = json::array();
  for (const auto& e : series.excluded) out.push_back({{"n", e.sites}, {"reason", e.reason}});
  return out;
}

int run_fn(const Options& o, const Diagnostics& diag) {
  const SizeRange sizes = resolve_sizes(o, "5..12");
  json config = base_config("fn", o);
  config["n"] = sizes.text();
  config["tol_generic"] = o.tol_generic;
  const Run run(config);

  const auto series = run_scaling_sweeps(sweep_config(o, sizes, diag),
                                         {Observable::fn, Observable::gn, Observable::gn_minus_fn});
  const ScalingSeries& fn = series[0];
  const ScalingSeries& gn = series[1];
  const ScalingSeries& gap = series[2];
  json rows = json::array();
  std::ostringstream csv;
  csv << "n,F_n,G_n,G_n_minus_F_n\n";
  for (std::size_t i = 0; i < fn.points.size(); ++i) {
    const int n = fn.points[i].sites;
    const auto g_it = std::find_if(gn.points.begin(), gn.points.end(),
                                   [n](const SeriesPoint& p) { return p.sites == n; });
    const double g_value = g_it->value;
    rows.push_back({{"n", n}, {"F_n", fn.points[i].value}, {"G_n", g_value},
                    {"G_n_minus_F_n", gap.points[i].value}});
    csv << n << ',' << format_number(fn.points[i].value) << ',' << format_number(g_value) << ','
        << format_number(gap.points[i].value) << '\n';
  }
  if (o.format == "csv") {
    emit(o, run.csv_comment() + csv.str());
  } else {
    emit_json(o, run, "results", {{"points", rows}, {"excluded", excluded_json(fn)}});
  }
  if (fn.excluded.empty()) return kExitOk;
  return diag.fail(kExitCheckFailed, "non_generic_spectrum",
                   std::to_string(fn.excluded.size()) +
                       " sizes excluded; rerun with a smaller --tol-generic or a narrower --n",
                   excluded_json(fn));
}

Matrix first_qubit_sigma_x(int dim) {
  if (dim < 2 || (dim & (dim - 1)) != 0) {
    throw UsageError("the sigmax preset needs --dim to be a power of two");
  }
  int sites = 0;
  while ((1 << sites) < dim) ++sites;
  return pauli_string_matrix(PauliString::single(PauliAxis::X, 1, sites), sites).entries();
}

int run_haar(const Options& o, const Diagnostics& diag) {
  if (o.dim < 2) throw UsageError("--dim must be at least 2");
  if (o.samples < 2) throw UsageError("--samples must be at least 2");
  json config = {{"command", "haar"}, {"dim", o.dim},         {"samples", o.samples},
                 {"seed", o.seed},    {"preset", o.preset},   {"z_limit", o.z_limit}};
  const Run run(config);

  Matrix a, b, c, d;
  if (o.preset == "sigmax") {
    a = first_qubit_sigma_x(o.dim);
    b = c = d = a;
  } else {
    std::mt19937_64 rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
    a = random_traceless_hermitian(o.dim, rng);
    b = random_traceless_hermitian(o.dim, rng);
    c = random_traceless_hermitian(o.dim, rng);
    d = random_traceless_hermitian(o.dim, rng);
  }
  const HaarEstimate estimate = haar_otoc_monte_carlo(a, b, c, d, o.samples, o.seed, o.threads);
  const double deviation = std::abs(estimate.mc_value - estimate.closed_form);
  const double z = estimate.mc_std_error > 0.0
                       ? deviation / estimate.mc_std_error
                       : (deviation == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  json record = haar_record(estimate);
  record["preset"] = o.preset;
  record["z"] = z;
  record["passed"] = z <= o.z_limit;
  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "dim,samples,seed,mc_re,mc_im,mc_std_error,cf_re,cf_im,z\n"
        << estimate.dim << ',' << estimate.samples << ',' << estimate.seed << ','
        << format_number(estimate.mc_value.real()) << ',' << format_number(estimate.mc_value.imag())
        << ',' << format_number(estimate.mc_std_error) << ','
        << format_number(estimate.closed_form.real()) << ','
        << format_number(estimate.closed_form.imag()) << ',' << format_number(z) << '\n';
    emit(o, run.csv_comment() + csv.str());
  } else {
    emit_json(o, run, "result", record);
  }
  if (z <= o.z_limit) return kExitOk;
  return diag.fail(kExitCheckFailed, "haar_mismatch",
                   "Monte Carlo estimate is " + format_number(z) + " standard errors from the closed form",
                   record);
}

int run_eth(const Options& o, const Diagnostics& diag) {
  const SizeRange sizes = resolve_sizes(o, "8..12");
  json config = base_config("eth", o);
  config["n"] = sizes.text();
  config["operator"] = o.op;
  config["fit_window"] = o.fit_window;
  const Run run(config);

  json rows = json::array();
  std::ostringstream csv;
  csv << "n,operator,points_used,intercept_re,slope_re,slope_im,residual_rms,predicted_intercept,"
         "predicted_slope,moment2,moment4,n_moment2,predicted_n_moment2\n";
  for (int n = sizes.lo; n <= sizes.hi; ++n) {
    const HamiltonianModel model = build_chain_hamiltonian(n, o.g, {}, o.max_sites);
    const OperatorSpec spec = parse_operator(o.op, n, o.g);
    const DenseOperator op = DenseOperator::from_pauli(spec.terms, n, spec.label);
    const double h_local = model.local_term_square_mean();
    const Complex mean = normalized_trace_inner(DenseOperator::identity(n), op);
    const Complex overlap = normalized_trace_inner(model.total(), op);
    const double predicted_slope = overlap.real() / h_local;
    const double predicted_moment = std::norm(overlap) / h_local;

    const SpectralData spectral = load_spectrum(model, o, diag);
    const DiagonalProfile profile = diagonal_profile(spec.terms, spectral, n, spec.label);
    const EthFit fit = fit_linear_response(profile, o.fit_window);
    const double m2 = diagonal_moment(profile, 2);
    const double m4 = diagonal_moment(profile, 4);
    if (!o.profile_dir.empty()) {
      std::ostringstream text;
      write_profile_csv(text, profile, o.g);
      write_file(std::filesystem::path(o.profile_dir) / ("profile_n" + std::to_string(n) + ".csv"),
                 text.str());
    }
    rows.push_back({{"n", n},
                    {"operator", spec.label},
                    {"points_used", fit.points_used},
                    {"intercept_re", fit.intercept.real()},
                    {"intercept_im", fit.intercept.imag()},
                    {"slope_re", fit.slope.real()},
                    {"slope_im", fit.slope.imag()},
                    {"residual_rms", fit.residual_rms},
                    {"predicted_intercept", mean.real()},
                    {"predicted_slope", predicted_slope},
                    {"moment2", m2},
                    {"moment4", m4},
                    {"n_moment2", n * m2},
                    {"predicted_n_moment2", predicted_moment}});
    csv << n << ",\"" << spec.label << "\"," << fit.points_used << ','
        << format_number(fit.intercept.real()) << ',' << format_number(fit.slope.real()) << ','
        << format_number(fit.slope.imag()) << ',' << format_number(fit.residual_rms) << ','
        << format_number(mean.real()) << ',' << format_number(predicted_slope) << ','
        << format_number(m2) << ',' << format_number(m4) << ',' << format_number(n * m2) << ','
        << format_number(predicted_moment) << '\n';
  }
  if (o.format == "csv") {
    emit(o, run.csv_comment() + csv.str());
  } else {
    emit_json(o, run, "results", rows);
  }
  return kExitOk;
}

int run_leakage(const Options& o, const Diagnostics& diag) {
  const int n = resolve_single_size(o, "10");
  const SizeRange gaps = parse_range(o.gaps, "--gaps");
  json config = base_config("leakage", o);
  config["n"] = n;
  config["operator"] = o.op;
  config["eps"] = o.eps;
  config["gaps"] = gaps.text();
  const Run run(config);

  const HamiltonianModel model = build_chain_hamiltonian(n, o.g, {}, o.max_sites);
  const SpectralData spectral = load_spectrum(model, o, diag);
  const OperatorSpec spec = parse_operator(o.op, n, o.g);
  const EnergyBasisOperator x = to_energy_basis(spec.terms, spectral, spec.label);

  json rows = json::array();
  std::ostringstream csv;
  csv << "gap,eps,eps_prime,leakage\n";
  std::vector<double> xs, logs;
  std::vector<double> values;
  bool monotone = true;
  for (int gap = gaps.lo; gap <= gaps.hi; ++gap) {
    const double value = microcanonical_leakage(x, spectral.energy_span(), o.eps, o.eps + gap);
    if (!values.empty() && value > values.back()) monotone = false;
    values.push_back(value);
    if (value > 0.0) {
      xs.push_back(gap);
      logs.push_back(std::log(value));
    }
    rows.push_back({{"gap", gap}, {"eps", o.eps}, {"eps_prime", o.eps + gap}, {"leakage", value}});
    csv << gap << ',' << format_number(o.eps) << ',' << format_number(o.eps + gap) << ','
        << format_number(value) << '\n';
  }
  json fit = nullptr;
  if (xs.size() >= 2) {
    const LineFit line = fit_line(xs, logs);
    const double drop = logs.front() - logs.back();
    fit = {{"c", std::exp(line.intercept)},
           {"eps0", line.slope < 0.0 ? -1.0 / line.slope : std::numeric_limits<double>::infinity()},
           {"rms_log_residual", line.rms_residual},
           {"log_drop", drop},
           {"rms_fraction_of_drop", drop > 0.0 ? json(line.rms_residual / drop) : json()}};
  }
  if (o.format == "csv") {
    emit(o, run.csv_comment() + csv.str());
  } else {
    emit_json(o, run, "results", {{"operator", spec.label}, {"points", rows}, {"fit", fit},
                                  {"monotone", monotone}});
  }
  if (monotone) return kExitOk;
  return diag.fail(kExitCheckFailed, "leakage_not_monotone",
                   "leakage increased when the gap was widened", rows);
}

int run_scaling(const Options& o, const Diagnostics& diag) {
  const SizeRange sizes = resolve_sizes(o, "5..12");
  std::vector<Observable> observables;
  for (const auto& text : o.observables) observables.push_back(parse_observable(text));
  if (observables.empty()) throw UsageError("--observable needs at least one value");
  json config = base_config("scaling", o);
  config["n"] = sizes.text();
  config["observables"] = o.observables;
  config["tail"] = o.tail;
  config["tol_generic"] = o.tol_generic;
  const Run run(config);
  const std::filesystem::path root = o.output.empty() ? "scaling-output" : o.output;

  const auto series = run_scaling_sweeps(sweep_config(o, sizes, diag), observables);
  json failures = json::array();
  for (const ScalingSeries& s : series) {
    const std::filesystem::path dir = root / s.observable;
    std::ostringstream text;
    write_series_csv(text, s, o.seed);
    write_file(dir / "series.csv", text.str());

    json fit_json{{"meta", run.metadata()},
                  {"observable", s.observable},
                  {"g", s.coupling},
                  {"excluded", excluded_json(s)}};
    try {
      const PowerLawFit fit = power_law_fit(s, o.tail);
      fit_json.update(fit_record(fit));
      std::cout << s.observable << ": exponent " << fit.exponent << ", amplitude "
                << fit.amplitude << " over n = " << fit.n_min << ".." << fit.n_max << " -> "
                << dir.string() << '\n';
    } catch (const InsufficientDataError& e) {
      fit_json["error"] = e.what();
      failures.push_back({{"observable", s.observable}, {"message", e.what()}});
    } catch (const DomainError& e) {
      fit_json["error"] = e.what();
      failures.push_back({{"observable", s.observable}, {"message", e.what()}});
    }
    write_file(dir / "fit.json", fit_json.dump(2) + "\n");
  }
  if (failures.empty()) return kExitOk;
  return diag.fail(kExitCheckFailed, "fit_failed",
                   std::to_string(failures.size()) + " power-law fits could not be made", failures);
}

int run_verify(const Options& o, const Diagnostics& diag) {
  std::vector<int> ids = o.criteria;
  if (ids.empty()) {
    for (int id = 1; id <= kCriterionCount; ++id) ids.push_back(id);
  }
  for (int id : ids) {
    if (id < 1 || id > kCriterionCount) {
      throw UsageError("--criteria: " + std::to_string(id) + " is not in 1.." +
                       std::to_string(kCriterionCount));
    }
  }
  json config = {{"command", "verify"},
                 {"criteria", ids},
                 {"seed", o.seed},
                 {"tol_generic", o.tol_generic},
                 {"sweep_tol_generic", o.sweep_tol_generic}};
  const Run run(config);

  VerifyOptions options;
  options.cache_dir = cache_location(o);
  options.threads = o.threads;
  options.generic_tolerance = o.tol_generic;
  options.sweep_generic_tolerance = o.sweep_tol_generic;
  options.seed = o.seed;
  options.warn = diag.sink();
  if (!o.quiet) options.progress = [](const std::string& m) { std::cerr << "... " << m << '\n'; };
  AcceptanceSuite suite(options);

  json results = json::array();
  std::vector<int> failed;
  for (int id : ids) {
    const CriterionResult result = suite.run(id);
    std::cout << render(result);
    std::cout.flush();
    results.push_back(criterion_record(result));
    if (!result.passed) failed.push_back(id);
  }
  std::cout << ids.size() << " criteria, " << failed.size() << " failed\n";
  if (!o.output.empty()) {
    const json out{{"meta", run.metadata()}, {"criteria", results}, {"passed", failed.empty()}};
    write_file(o.output, out.dump(2) + "\n");
  }
  if (failed.empty()) return kExitOk;
  return diag.fail(kExitCheckFailed, "acceptance_failed",
                   std::to_string(failed.size()) + " acceptance criteria failed", failed);
}

// key = value lines; '#' starts a comment and keys may carry a leading "--".
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("--config: cannot read '" + path + "'");
  const auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
  };
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("--config: line " + std::to_string(number) + " is not key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    entries.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return entries;
}

// Values from --config are appended as extra flags for every option the
// command line left unset, then everything is parsed again so validators
// apply to both sources.
void parse_with_config(CLI::App& app, int argc, char** argv, const Options& o) {
  app.parse(argc, argv);
  if (o.config.empty()) return;
  CLI::App* sub = app.get_subcommands().front();
  std::vector<std::string> args(argv + 1, argv + argc);
  for (const auto& [key, value] : read_config(o.config)) {
    const CLI::Option* option = sub->get_option_no_throw("--" + key);
    if (option == nullptr || key == "config") {
      throw UsageError("--config: '" + key + "' is not an option of '" + sub->get_name() + "'");
    }
    if (option->count() == 0) args.push_back("--" + key + "=" + value);
  }
  std::reverse(args.begin(), args.end());
  app.parse(std::move(args));
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config,
                  "key = value file (keys are long flag names); command-line flags take precedence");
  sub->add_flag("--json-diagnostics", o.json_diagnostics,
                "Report errors and warnings on stderr as JSON lines");
}

void add_model(CLI::App* sub, Options& o, const std::string& n_default) {
  auto* n = sub->add_option("--n", o.n,
                            "Chain length, or a range A..B" +
                                (n_default.empty() ? std::string(" (required)")
                                                   : " (default " + n_default + ")"));
  sub->add_option("--n-range", o.n_range, "Chain lengths A..B")->excludes(n);
  sub->add_option("--g", o.g, "Coupling of the Y_i Z_{i+1} term");
  sub->add_option("--max-sites", o.max_sites, "Largest chain materialized densely")
      ->check(CLI::Range(1, 30));
}

void add_cache(CLI::App* sub, Options& o) {
  sub->add_option("--cache-dir", o.cache_dir,
                  std::string("Spectral cache directory; ") + kCacheEnvVar +
                      " overrides it (default " + kDefaultCacheDir + ")");
  sub->add_flag("--no-cache", o.no_cache, "Diagonalize without reading or writing the cache");
}

void add_threads(CLI::App* sub, Options& o) {
  sub->add_option("--threads", o.threads, "Worker threads; 0 uses every available core");
}

void add_output(CLI::App* sub, Options& o, bool with_format) {
  sub->add_option("--output", o.output, "Output file; stdout when empty or '-'");
  if (with_format) {
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  }
}

void add_tolerance(CLI::App* sub, Options& o, double fallback, const std::string& note) {
  o.tol_generic = fallback;
  sub->add_option("--tol-generic", o.tol_generic,
                  "Collision tolerance of the generic-spectrum check" + note)
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  bool json_diagnostics = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--json-diagnostics") json_diagnostics = true;
  }
  const Diagnostics diag(json_diagnostics);

  Options o;
  CLI::App app{"Out-of-time-order correlators of finite spin chains", "otoc-lab"};
  app.set_version_flag("--version", std::string(version()));
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.footer(std::string("Exit status: 0 success, 1 check failure, 2 usage error.\n") +
             "Environment: " + kCacheEnvVar + " sets the spectral cache directory.");

  auto* spectrum = app.add_subcommand("spectrum", "Diagonalize and report the generic-spectrum check");
  add_model(spectrum, o, "");
  add_tolerance(spectrum, o, kDefaultGenericTolerance, "");
  spectrum->add_flag("--energies", o.list_energies, "Include every eigenvalue in the JSON output");
  add_cache(spectrum, o);
  add_output(spectrum, o, true);
  add_common(spectrum, o);

  auto* otoc_cmd = app.add_subcommand("otoc", "Late-time average of one correlator <A B(t) C D(t)>");
  add_model(otoc_cmd, o, "6");
  otoc_cmd->add_option("--a", o.a, "Operator A: x<k>, y<k>, z<k>, h<k> (local term) or a Pauli string");
  otoc_cmd->add_option("--b", o.b, "Operator B (same forms as --a)");
  otoc_cmd->add_option("--c", o.c, "Operator C (default: A)");
  otoc_cmd->add_option("--d", o.d, "Operator D (default: B)");
  otoc_cmd->add_option("--route", o.route, "Evaluation route")
      ->check(CLI::IsMember({"sampled", "closed-form", "eigenstate", "theory"}));
  add_tolerance(otoc_cmd, o, kDefaultGenericTolerance, "");
  otoc_cmd->add_option("--target-se", o.target_se, "Target standard error of the sampled route")
      ->check(CLI::PositiveNumber);
  otoc_cmd->add_option("--max-samples", o.max_samples, "Sample cap of the sampled route")
      ->check(CLI::PositiveNumber);
  otoc_cmd->add_option("--burn-in", o.burn_in, "Earliest sampled time")->check(CLI::NonNegativeNumber);
  otoc_cmd->add_option("--window", o.window, "Minimum length of the sampled time window")
      ->check(CLI::PositiveNumber);
  otoc_cmd->add_flag("--fixed-window", o.fixed_window,
                     "Do not stretch the window to resolve the smallest spectral frequency");
  otoc_cmd->add_option("--seed", o.seed, "Seed of the time sampler");
  add_cache(otoc_cmd, o);
  add_threads(otoc_cmd, o);
  add_output(otoc_cmd, o, true);
  add_common(otoc_cmd, o);

  auto* fn = app.add_subcommand("fn", "Translation-averaged F_n with its leading prediction G_n");
  add_model(fn, o, "5..12");
  add_tolerance(fn, o, kPrecisionGenericTolerance,
                "; the default sits just above rounding error because collisions below 1e-8 "
                "occur by chance from n = 9");
  fn->add_flag("--allow-large", o.allow_large, "Permit n above 12");
  fn->add_option("--memory-gb", o.memory_gb, "Memory budget for concurrent sizes")
      ->check(CLI::PositiveNumber);
  add_cache(fn, o);
  add_threads(fn, o);
  add_output(fn, o, true);
  add_common(fn, o);

  auto* haar = app.add_subcommand("haar", "Haar Monte Carlo against the closed form");
  haar->add_option("--dim", o.dim, "Hilbert space dimension")->check(CLI::Range(2, 4096));
  haar->add_option("--samples", o.samples, "Number of Haar unitaries")->check(CLI::PositiveNumber);
  haar->add_option("--seed", o.seed, "Seed of the unitary sampler");
  haar->add_option("--preset", o.preset,
                   "sigmax: A = B = C = D = sigma^x on the first qubit; random: four random "
                   "traceless Hermitian operators drawn from the seed")
      ->check(CLI::IsMember({"sigmax", "random"}));
  haar->add_option("--z-limit", o.z_limit, "Largest accepted deviation in standard errors")
      ->check(CLI::PositiveNumber);
  add_threads(haar, o);
  add_output(haar, o, true);
  add_common(haar, o);

  auto* eth = app.add_subcommand("eth", "Diagonal profiles, linear fits and moments");
  add_model(eth, o, "8..12");
  eth->add_option("--operator", o.op, "Operator (same forms as otoc --a)");
  eth->add_option("--fit-window", o.fit_window, "Energy-density half-width of the linear fit")
      ->check(CLI::PositiveNumber);
  eth->add_option("--profile-dir", o.profile_dir, "Also write one profile CSV per size here");
  add_cache(eth, o);
  add_output(eth, o, true);
  add_common(eth, o);

  auto* leakage = app.add_subcommand("leakage", "Microcanonical leakage against the window gap");
  add_model(leakage, o, "10");
  leakage->add_option("--operator", o.op, "Operator (same forms as otoc --a)");
  leakage->add_option("--eps", o.eps, "Upper edge of the low-energy window");
  leakage->add_option("--gaps", o.gaps, "Integer gaps eps' - eps, as A..B");
  add_cache(leakage, o);
  add_output(leakage, o, true);
  add_common(leakage, o);

  auto* scaling = app.add_subcommand("scaling", "Size sweeps with power-law fits");
  add_model(scaling, o, "5..12");
  scaling->add_option("--observable", o.observables,
                      "fn, gn, gn_minus_fn or theorem_residual; repeat or separate by commas")
      ->delimiter(',');
  scaling->add_option("--tail", o.tail, "Number of largest sizes in each fit")
      ->check(CLI::Range(3, 64));
  add_tolerance(scaling, o, kPrecisionGenericTolerance,
                "; the default sits just above rounding error because collisions below 1e-8 "
                "occur by chance from n = 9");
  scaling->add_option("--seed", o.seed, "Seed recorded in the artifacts");
  scaling->add_flag("--allow-large", o.allow_large, "Permit n above 12");
  scaling->add_option("--memory-gb", o.memory_gb, "Memory budget for concurrent sizes")
      ->check(CLI::PositiveNumber);
  add_cache(scaling, o);
  add_threads(scaling, o);
  scaling->add_option("--output", o.output,
                      "Directory receiving <observable>/series.csv and <observable>/fit.json "
                      "(default scaling-output)");
  add_common(scaling, o);

  auto* verify = app.add_subcommand("verify", "Run the desk-scale acceptance suite");
  verify->add_option("--criteria", o.criteria, "Criteria to run (default: all)")->delimiter(',');
  add_tolerance(verify, o, kDefaultGenericTolerance,
                " for the spectrum, route and brute-force criteria");
  verify->add_option("--sweep-tol-generic", o.sweep_tol_generic,
                     "Collision tolerance certifying the n = 5..12 sweep spectra")
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", o.seed, "Root seed of the randomized checks");
  verify->add_flag("--quiet", o.quiet, "Suppress progress messages");
  add_cache(verify, o);
  add_threads(verify, o);
  verify->add_option("--output", o.output, "Also write the results as JSON to this file");
  add_common(verify, o);

  try {
    parse_with_config(app, argc, argv, o);
    CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    // Subcommands share one Options struct, so the tolerance default written
    // last during registration is replaced by the chosen subcommand's own.
    if (chosen->get_option_no_throw("--tol-generic") != nullptr &&
        chosen->get_option("--tol-generic")->count() == 0) {
      o.tol_generic = (name == "fn" || name == "scaling") ? kPrecisionGenericTolerance
                                                          : kDefaultGenericTolerance;
    }
    if (name == "spectrum") return run_spectrum(o, diag);
    if (name == "otoc") return run_otoc(o, diag);
    if (name == "fn") return run_fn(o, diag);
    if (name == "haar") return run_haar(o, diag);
    if (name == "eth") return run_eth(o, diag);
    if (name == "leakage") return run_leakage(o, diag);
    if (name == "scaling") return run_scaling(o, diag);
    if (name == "verify") return run_verify(o, diag);
    return diag.fail(kExitUsage, "usage", "unknown subcommand '" + name + "'");
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return diag.fail(kExitUsage, "usage", std::string(e.what()) + " (run with --help for usage)");
  } catch (const UsageError& e) {
    return diag.fail(kExitUsage, "usage", e.what());
  } catch (const DimensionError& e) {
    return diag.fail(kExitUsage, "invalid_request", e.what());
  } catch (const DomainError& e) {
    return diag.fail(kExitUsage, "invalid_request", e.what());
  } catch (const IndexError& e) {
    return diag.fail(kExitUsage, "invalid_request", e.what());
  } catch (const ResourceError& e) {
    return diag.fail(kExitUsage, "invalid_request", e.what());
  } catch (const AssumptionError& e) {
    return diag.fail(kExitCheckFailed, "assumption_failed", e.what());
  } catch (const Error& e) {
    return diag.fail(kExitCheckFailed, "error", e.what());
  } catch (const std::exception& e) {
    return diag.fail(kExitCheckFailed, "internal_error", e.what());
  }
}
