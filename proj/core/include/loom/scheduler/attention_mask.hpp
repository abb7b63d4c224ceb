#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "loom/core/types.hpp"

namespace loom::scheduler {

/// Dense boolean attention relation, query-major.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t n) : n_(n), allowed_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool allowed(std::size_t query, std::size_t key) const { return allowed_[query * n_ + key] != 0; }
  void set(std::size_t query, std::size_t key, bool value) {
    allowed_[query * n_ + key] = value ? 1 : 0;
  }
  const std::uint8_t* row(std::size_t query) const { return allowed_.data() + query * n_; }

  /// '1'/'0' grid, one row per query, each row terminated by '\n'.
  std::string to_golden() const;
  static AttentionMask from_golden(std::string_view text);

  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> allowed_;
};

/// Checks that spans tile [0, n) in order with text spans first, then clean
/// history spans, then at most one noised target span, and that every tag
/// agrees with its role. Throws LayoutError otherwise.
void validate_layout(const std::vector<TokenSpan>& spans);

/// Noise-isolating mask:
///  - text attends causally to text;
///  - a clean frame attends within itself and to all text;
///  - the noised target attends within itself, to all text and to all clean frames;
///  - nothing outside the noised span attends into it.
AttentionMask build_attention_mask(const std::vector<TokenSpan>& spans);

}  // namespace loom::scheduler
