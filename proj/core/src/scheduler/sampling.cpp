#include "loom/scheduler/sampling.hpp"

#include <algorithm>
#include <string>

#include "loom/core/error.hpp"

namespace loom::scheduler {

std::vector<int> sample_history(std::size_t t, std::size_t k_max) {
  return sample_history_offset(t, k_max, 0);
}

std::size_t offset_range(std::size_t t, std::size_t k_max) {
  if (k_max < 1) throw RangeError("k_max must be >= 1");
  return std::max<std::size_t>(1, t / (k_max + 1));
}

std::vector<int> sample_history_offset(std::size_t t, std::size_t k_max, std::size_t offset) {
  const auto range = offset_range(t, k_max);
  if (offset >= range) {
    throw RangeError("rotation offset " + std::to_string(offset) + " outside [0, " +
                     std::to_string(range) + ") for t=" + std::to_string(t) +
                     ", k_max=" + std::to_string(k_max));
  }
  std::vector<int> out;
  if (t <= k_max) {
    for (std::size_t i = 1; i <= t; ++i) out.push_back(static_cast<int>(i));
    return out;
  }
  out.reserve(k_max);
  for (std::size_t i = 1; i <= k_max; ++i) {
    const std::size_t k = i * t / (k_max + 1) + offset;
    if (k >= 1 && k <= t) out.push_back(static_cast<int>(k));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double rotation_coverage(std::size_t t, std::size_t k_max) {
  if (t == 0) return 1.0;
  std::vector<bool> seen(t + 1, false);
  for (std::size_t o = 0; o < offset_range(t, k_max); ++o) {
    for (int k : sample_history_offset(t, k_max, o)) seen[static_cast<std::size_t>(k)] = true;
  }
  return static_cast<double>(std::count(seen.begin() + 1, seen.end(), true)) /
         static_cast<double>(t);
}

}  // namespace loom::scheduler
