#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "otoc_lab/spectral.hpp"

namespace otoc {

inline constexpr std::uint32_t kCacheFormatVersion = 1;
// Bump when the model definition changes so stale files are never reused.
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr const char* kCacheEnvVar = "OTOC_LAB_CACHE";
inline constexpr const char* kDefaultCacheDir = ".otoc-lab-cache";

// Binary layout, all little-endian:
//   "OTLB" | u32 format version | u32 n | f64 g | u64 d
//   | d x f64 energies | d*d x (f64 re, f64 im), column-major
//   | u64 CRC-64/XZ of every preceding byte
struct CachedSpectrum {
  int sites = 0;
  double coupling = 0.0;
  Eigen::VectorXd energies;
  Matrix eigenvectors;
};

void write_spectral_file(std::ostream& out, const SpectralData& spectral, int sites,
                         double coupling);
// Throws FormatError on a bad magic, version, size or checksum.
CachedSpectrum read_spectral_file(std::istream& in);

// OTOC_LAB_CACHE wins over the flag; with neither set the default directory
// is used.
std::filesystem::path resolve_cache_directory(const std::optional<std::filesystem::path>& flag);

using WarningSink = std::function<void(const std::string&)>;

// Eigendecompositions keyed by (n, g, model version). Safe to use from
// several threads or processes: the first complete write of a key wins and
// later writers check the stored file and discard their own copy.
class SpectralCache {
 public:
  explicit SpectralCache(std::filesystem::path directory);

  const std::filesystem::path& directory() const { return directory_; }
  std::filesystem::path path_for(int sites, double coupling) const;

  // Empty when no file exists. Throws FormatError when the file is corrupt
  // or belongs to a different model.
  std::optional<SpectralData> load(const HamiltonianModel& model) const;
  // Returns true when this call's file became the cached copy.
  bool store(const SpectralData& spectral) const;

  // Loads, or diagonalizes and stores. A corrupt file is reported through
  // `warn`, removed and rebuilt.
  SpectralData load_or_compute(const HamiltonianModel& model, int max_sites = kDefaultMaxSites,
                               const WarningSink& warn = {}) const;

 private:
  std::filesystem::path directory_;
};

}  // namespace otoc
