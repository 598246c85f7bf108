#include "otoc_lab/records.hpp"

#include <cstdio>
#include <sstream>

#include "otoc_lab/checksum.hpp"
#include "otoc_lab/format.hpp"

#ifndef OTOC_LAB_VERSION
#define OTOC_LAB_VERSION "0.0.0"
#endif

namespace otoc {

namespace {

nlohmann::json quadruple_json(const Quadruple& q) {
  return {{"p", q.p}, {"q", q.q}, {"r", q.r}, {"s", q.s}, {"gap", q.gap}};
}

}  // namespace

std::string_view version() { return OTOC_LAB_VERSION; }

std::string config_hash(std::string_view canonical_config) {
  const std::uint64_t h = crc64(std::as_bytes(std::span(canonical_config)));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json otoc_record(const OtocEstimate& estimate, const OtocRecordContext& context) {
  return {
      {"n", context.sites},
      {"g", context.coupling},
      {"route", to_string(estimate.route)},
      {"operators", context.operators},
      {"value_re", estimate.value.real()},
      {"value_im", estimate.value.imag()},
      {"std_error", estimate.std_error},
      {"samples", estimate.samples},
      {"window", estimate.window},
      {"seed", context.seed},
      {"wall_time_s", context.wall_time_s},
  };
}

std::string otoc_csv_header() {
  return "n,g,route,operators,value_re,value_im,std_error,samples,window,seed,wall_time_s";
}

std::string otoc_csv_row(const OtocEstimate& estimate, const OtocRecordContext& context) {
  std::ostringstream out;
  out << context.sites << ',' << format_number(context.coupling) << ','
      << to_string(estimate.route) << ",\"" << context.operators << "\","
      << format_number(estimate.value.real()) << ',' << format_number(estimate.value.imag()) << ','
      << format_number(estimate.std_error) << ',' << estimate.samples << ','
      << format_number(estimate.window) << ',' << context.seed << ','
      << format_number(context.wall_time_s);
  return out.str();
}

nlohmann::json haar_record(const HaarEstimate& estimate) {
  return {
      {"dim", estimate.dim},
      {"samples", estimate.samples},
      {"seed", estimate.seed},
      {"mc_re", estimate.mc_value.real()},
      {"mc_im", estimate.mc_value.imag()},
      {"mc_std_error", estimate.mc_std_error},
      {"cf_re", estimate.closed_form.real()},
      {"cf_im", estimate.closed_form.imag()},
  };
}

nlohmann::json genericity_record(const GenericityReport& report, int sites, double coupling,
                                 std::size_t listed) {
  nlohmann::json violations = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min(listed, report.violations.size()); ++i) {
    violations.push_back(quadruple_json(report.violations[i]));
  }
  nlohmann::json near = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min(listed, report.near_misses.size()); ++i) {
    near.push_back(quadruple_json(report.near_misses[i]));
  }
  return {
      {"n", sites},
      {"g", coupling},
      {"passed", report.passed},
      {"tolerance", report.tolerance},
      {"violation_count", report.violation_count},
      {"near_miss_count", report.near_miss_count},
      {"smallest_gap", report.smallest_gap},
      {"violations", violations},
      {"near_misses", near},
  };
}

nlohmann::json fit_record(const PowerLawFit& fit) {
  return {
      {"amplitude", fit.amplitude},
      {"exponent", fit.exponent},
      {"fit_range", {fit.n_min, fit.n_max}},
      {"rms_log_residual", fit.rms_log_residual},
      {"points", fit.points},
  };
}

nlohmann::json criterion_record(const CriterionResult& result) {
  return {
      {"id", result.id},
      {"name", result.name},
      {"passed", result.passed},
      {"details", result.details},
      {"seconds", result.seconds},
  };
}

}  // namespace otoc
