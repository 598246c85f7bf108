#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "otoc_lab/haar.hpp"
#include "otoc_lab/otoc.hpp"
#include "otoc_lab/scaling.hpp"
#include "otoc_lab/spectral.hpp"
#include "otoc_lab/verification.hpp"

namespace otoc {

std::string_view version();

// CRC-64 of a canonical configuration string, as 16 hex digits.
std::string config_hash(std::string_view canonical_config);

struct OtocRecordContext {
  int sites = 0;
  double coupling = 0.0;
  std::string operators;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

nlohmann::json otoc_record(const OtocEstimate& estimate, const OtocRecordContext& context);
// Column order shared by the CSV form of OTOC records.
std::string otoc_csv_header();
std::string otoc_csv_row(const OtocEstimate& estimate, const OtocRecordContext& context);

nlohmann::json haar_record(const HaarEstimate& estimate);
nlohmann::json genericity_record(const GenericityReport& report, int sites, double coupling,
                                 std::size_t listed = 20);
nlohmann::json fit_record(const PowerLawFit& fit);
nlohmann::json criterion_record(const CriterionResult& result);

}  // namespace otoc
