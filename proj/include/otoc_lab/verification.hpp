#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "otoc_lab/spectral.hpp"
#include "otoc_lab/spectral_cache.hpp"

namespace otoc {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::vector<std::string> details;
  double seconds = 0.0;
};

struct VerifyOptions {
  // No caching when empty.
  std::optional<std::filesystem::path> cache_dir;
  unsigned threads = 0;
  // Tolerance for the genericity scans of criteria 1, 3 and 4.
  double generic_tolerance = kDefaultGenericTolerance;
  // Tolerance for certifying the n = 5..12 spectra behind the scaling fits.
  double sweep_generic_tolerance = kPrecisionGenericTolerance;
  std::uint64_t seed = 20240607;
  WarningSink warn;
  std::function<void(const std::string&)> progress;
};

inline constexpr int kCriterionCount = 9;

// "[PASS] criterion k: name (t s)" followed by one indented line per detail.
std::string render(const CriterionResult& result);

// Desk-scale acceptance suite. Spectra and the n-sweep are computed once and
// shared between criteria.
class AcceptanceSuite {
 public:
  explicit AcceptanceSuite(VerifyOptions options);
  ~AcceptanceSuite();
  AcceptanceSuite(const AcceptanceSuite&) = delete;
  AcceptanceSuite& operator=(const AcceptanceSuite&) = delete;

  // Criteria are numbered 1..kCriterionCount. Exceptions inside a criterion
  // are reported as a failure, never propagated.
  CriterionResult run(int id);
  std::vector<CriterionResult> run_all();

  static std::string name(int id);

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace otoc
