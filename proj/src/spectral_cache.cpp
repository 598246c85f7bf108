#include "otoc_lab/spectral_cache.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

#include <unistd.h>

#include "otoc_lab/checksum.hpp"
#include "otoc_lab/errors.hpp"

namespace otoc {

namespace {

constexpr char kMagic[4] = {'O', 'T', 'L', 'B'};
constexpr int kMaxCachedSites = 20;

template <typename T>
T byteswap_value(T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

class ChecksummedWriter {
 public:
  explicit ChecksummedWriter(std::ostream& out) : out_(out) {}

  void raw(const void* data, std::size_t size) {
    const auto bytes = std::span(static_cast<const std::byte*>(data), size);
    crc_.update(bytes);
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
  }

  template <typename T>
  void scalar(T value) {
    if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
    raw(&value, sizeof(T));
  }

  void doubles(const double* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(data, count * sizeof(double));
    } else {
      for (std::size_t i = 0; i < count; ++i) scalar(data[i]);
    }
  }

  std::uint64_t checksum() const { return crc_.value(); }

 private:
  std::ostream& out_;
  Crc64 crc_;
};

class ChecksummedReader {
 public:
  explicit ChecksummedReader(std::istream& in) : in_(in) {}

  void raw(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) {
      throw FormatError("spectral cache file is truncated");
    }
    crc_.update(std::span(static_cast<const std::byte*>(data), size));
  }

  template <typename T>
  T scalar() {
    T value;
    raw(&value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
    return value;
  }

  void doubles(double* data, std::size_t count) {
    raw(data, count * sizeof(double));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < count; ++i) data[i] = byteswap_value(data[i]);
    }
  }

  std::uint64_t checksum() const { return crc_.value(); }

 private:
  std::istream& in_;
  Crc64 crc_;
};

std::mutex& key_mutex(const std::filesystem::path& path) {
  static std::mutex registry_guard;
  static std::map<std::string, std::mutex> registry;
  std::lock_guard lock(registry_guard);
  return registry[path.string()];
}

bool file_is_valid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  try {
    read_spectral_file(in);
    return true;
  } catch (const FormatError&) {
    return false;
  }
}

}  // namespace

void write_spectral_file(std::ostream& out, const SpectralData& spectral, int sites,
                         double coupling) {
  const auto d = static_cast<std::uint64_t>(spectral.dim());
  ChecksummedWriter w(out);
  w.raw(kMagic, sizeof(kMagic));
  w.scalar<std::uint32_t>(kCacheFormatVersion);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(sites));
  w.scalar<double>(coupling);
  w.scalar<std::uint64_t>(d);
  w.doubles(spectral.energies().data(), d);
  w.doubles(reinterpret_cast<const double*>(spectral.eigenvectors().data()), 2 * d * d);
  const std::uint64_t crc = w.checksum();
  std::uint64_t trailer = crc;
  if constexpr (std::endian::native == std::endian::big) trailer = byteswap_value(trailer);
  out.write(reinterpret_cast<const char*>(&trailer), sizeof(trailer));
  if (!out) throw FormatError("failed to write spectral cache data");
}

CachedSpectrum read_spectral_file(std::istream& in) {
  ChecksummedReader r(in);
  char magic[4];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a spectral cache file (bad magic)");
  }
  const auto version = r.scalar<std::uint32_t>();
  if (version != kCacheFormatVersion) {
    throw FormatError("unsupported spectral cache format version " + std::to_string(version));
  }
  CachedSpectrum out;
  out.sites = static_cast<int>(r.scalar<std::uint32_t>());
  out.coupling = r.scalar<double>();
  const auto d = r.scalar<std::uint64_t>();
  if (out.sites < 0 || out.sites > kMaxCachedSites || d != (std::uint64_t{1} << out.sites)) {
    throw FormatError("inconsistent header: n=" + std::to_string(out.sites) +
                      " d=" + std::to_string(d));
  }
  const auto dim = static_cast<Eigen::Index>(d);
  out.energies.resize(dim);
  r.doubles(out.energies.data(), d);
  out.eigenvectors.resize(dim, dim);
  r.doubles(reinterpret_cast<double*>(out.eigenvectors.data()), 2 * d * d);
  const std::uint64_t expected = r.checksum();
  std::uint64_t stored = 0;
  in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
  if (in.gcount() != sizeof(stored)) throw FormatError("spectral cache file is truncated");
  if constexpr (std::endian::native == std::endian::big) stored = byteswap_value(stored);
  if (stored != expected) throw FormatError("spectral cache checksum mismatch");
  return out;
}

std::filesystem::path resolve_cache_directory(const std::optional<std::filesystem::path>& flag) {
  if (const char* env = std::getenv(kCacheEnvVar); env != nullptr && *env != '\0') {
    return std::filesystem::path(env);
  }
  if (flag) return *flag;
  return std::filesystem::path(kDefaultCacheDir);
}

SpectralCache::SpectralCache(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::filesystem::path SpectralCache::path_for(int sites, double coupling) const {
  char name[96];
  std::snprintf(name, sizeof(name), "n%d_g%016llx_v%u.otlb", sites,
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(coupling)),
                kModelVersion);
  return directory_ / name;
}

std::optional<SpectralData> SpectralCache::load(const HamiltonianModel& model) const {
  const auto path = path_for(model.sites(), model.coupling());
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  CachedSpectrum cached = read_spectral_file(in);
  if (cached.sites != model.sites() ||
      std::bit_cast<std::uint64_t>(cached.coupling) !=
          std::bit_cast<std::uint64_t>(model.coupling())) {
    throw FormatError("cache file " + path.string() + " holds a different model");
  }
  std::optional<SpectralData> loaded;
  try {
    loaded.emplace(std::move(cached.energies), std::move(cached.eigenvectors), model_tag(model));
  } catch (const Error& e) {
    throw FormatError("cache file " + path.string() + " is inconsistent: " + e.what());
  }
  SpectralData& spectral = *loaded;
  const double residual = decomposition_residual(model.total(), spectral);
  if (!(residual <= kDecompositionTolerance)) {
    throw FormatError("cache file " + path.string() + " fails the eigendecomposition check " +
                      "(relative residual " + std::to_string(residual) + ")");
  }
  return std::move(spectral);
}

bool SpectralCache::store(const SpectralData& spectral) const {
  const ModelTag& tag = spectral.tag();
  if (std::isnan(tag.coupling)) {
    throw ContractError("only chain-model spectra can be cached");
  }
  std::filesystem::create_directories(directory_);
  const auto final_path = path_for(tag.sites, tag.coupling);
  std::lock_guard lock(key_mutex(final_path));

  static std::atomic<unsigned> counter{0};
  auto tmp_path = final_path;
  tmp_path += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp_path.string() + " for writing");
    write_spectral_file(out, spectral, tag.sites, tag.coupling);
  }

  bool won = false;
  for (int attempt = 0; attempt < 2 && !won; ++attempt) {
    std::error_code ec;
    std::filesystem::create_hard_link(tmp_path, final_path, ec);
    if (!ec) {
      won = true;
      break;
    }
    if (ec != std::errc::file_exists) {
      std::filesystem::remove(tmp_path);
      throw FormatError("cannot publish cache file " + final_path.string() + ": " +
                        ec.message());
    }
    if (file_is_valid(final_path)) break;
    std::filesystem::remove(final_path, ec);
  }
  std::filesystem::remove(tmp_path);
  return won;
}

SpectralData SpectralCache::load_or_compute(const HamiltonianModel& model, int max_sites,
                                            const WarningSink& warn) const {
  try {
    if (auto cached = load(model)) return std::move(*cached);
  } catch (const FormatError& e) {
    if (warn) warn(std::string("rebuilding spectral cache: ") + e.what());
    std::error_code ec;
    std::filesystem::remove(path_for(model.sites(), model.coupling()), ec);
  }
  SpectralData fresh = diagonalize(model, max_sites);
  store(fresh);
  return fresh;
}

}  // namespace otoc
