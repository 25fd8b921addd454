#pragma once

#include <cstddef>
#include <span>

namespace slfa {

// Pairwise (tree) summation. The tree shape depends only on the length, so
// results are reproducible regardless of how the terms were produced.
template <typename T>
T pairwise_sum(std::span<const T> x) {
  constexpr std::size_t kLeaf = 16;
  if (x.size() <= kLeaf) {
    T s = 0;
    for (T v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double pairwise_sum(std::span<const double> x) {
  return pairwise_sum<double>(x);
}

}  // namespace slfa
