#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

namespace otoc {

// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout all ones).
class Crc64 {
 public:
  Crc64();
  ~Crc64();
  Crc64(Crc64&&) noexcept;
  Crc64& operator=(Crc64&&) noexcept;

  void update(std::span<const std::byte> bytes);
  std::uint64_t value() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::uint64_t crc64(std::span<const std::byte> bytes);

}  // namespace otoc
