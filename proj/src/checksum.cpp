#include "otoc_lab/checksum.hpp"

#include <boost/crc.hpp>

namespace otoc {

using Crc64Xz = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true>;

struct Crc64::Impl {
  Crc64Xz crc;
};

Crc64::Crc64() : impl_(std::make_unique<Impl>()) {}
Crc64::~Crc64() = default;
Crc64::Crc64(Crc64&&) noexcept = default;
Crc64& Crc64::operator=(Crc64&&) noexcept = default;

void Crc64::update(std::span<const std::byte> bytes) {
  impl_->crc.process_bytes(bytes.data(), bytes.size());
}

std::uint64_t Crc64::value() const { return impl_->crc.checksum(); }

std::uint64_t crc64(std::span<const std::byte> bytes) {
  Crc64 crc;
  crc.update(bytes);
  return crc.value();
}

}  // namespace otoc
