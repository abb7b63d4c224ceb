#pragma once

#include <cstddef>
#include <set>
#include <vector>

namespace loom::testkit {

// Enumerates floor(i*t/(k+1)) + o with exact rational comparison: index j is
// hit by step i iff (k+1)*(j-o) <= i*t < (k+1)*(j-o+1).
inline std::vector<int> brute_force_history(std::size_t t, std::size_t k, std::size_t o) {
  if (t <= k) {
    std::vector<int> all;
    for (std::size_t j = 1; j <= t; ++j) all.push_back(static_cast<int>(j));
    return all;
  }
  std::set<int> hit;
  for (std::size_t j = 1; j <= t; ++j) {
    if (j < o) continue;
    const std::size_t base = j - o;
    for (std::size_t i = 1; i <= k; ++i) {
      if ((k + 1) * base <= i * t && i * t < (k + 1) * (base + 1)) hit.insert(static_cast<int>(j));
    }
  }
  return {hit.begin(), hit.end()};
}

}  // namespace loom::testkit
