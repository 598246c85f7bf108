#pragma once

#include <charconv>
#include <string>

namespace otoc {

// Shortest decimal text that reads back as the same double.
inline std::string format_number(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

}  // namespace otoc
