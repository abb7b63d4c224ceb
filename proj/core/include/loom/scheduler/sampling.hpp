#pragma once

#include <cstddef>
#include <vector>

namespace loom::scheduler {

/// Reference budget and rotation offset for sparse history sampling.
struct SamplerConfig {
  std::size_t k_max = 2;
  std::size_t offset = 0;
};

/// Uniform sparse selection of 1-based prior-frame indices.
///
/// With t prior frames and budget k_max, returns {1..t} when t <= k_max
/// (full context), otherwise floor(i*t/(k_max+1)) for i = 1..k_max with zeros
/// and duplicates removed. Always sorted ascending with at most k_max entries.
std::vector<int> sample_history(std::size_t t, std::size_t k_max);

/// Number of distinct training-time rotation offsets: max(1, floor(t/(k_max+1))).
std::size_t offset_range(std::size_t t, std::size_t k_max);

/// sample_history shifted by a rotation offset o in [0, offset_range(t, k_max)).
/// When t <= k_max only o = 0 is valid and the result is the full context.
/// Throws RangeError for an out-of-range offset.
std::vector<int> sample_history_offset(std::size_t t, std::size_t k_max, std::size_t offset);

/// Fraction of positions 1..t hit by at least one offset's sample.
double rotation_coverage(std::size_t t, std::size_t k_max);

}  // namespace loom::scheduler
