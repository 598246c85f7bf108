#pragma once

#include <cstddef>
#include <span>

namespace otoc {

// Pairwise (cascade) summation. The result depends only on the order of the
// input, never on how the work producing it was scheduled, and the rounding
// error grows as O(log N).
template <typename T>
T pairwise_sum(std::span<const T> values) {
  constexpr std::size_t kBlock = 32;
  if (values.size() <= kBlock) {
    T sum{};
    for (const T& v : values) sum += v;
    return sum;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace otoc
