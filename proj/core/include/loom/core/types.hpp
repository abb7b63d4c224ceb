#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace loom {

enum class ModalityTag { Text, CleanVisual, NoisedLatent };

enum class SpanRole { Prompt, Plan, HistoryFrame, TargetFrame };

/// A contiguous run of packed-sequence positions sharing one modality and role.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t length = 1;
  ModalityTag tag = ModalityTag::Text;
  std::optional<int> frame_index;  // unset for text spans
  SpanRole role = SpanRole::Prompt;

  std::size_t end() const { return start + length; }
  bool operator==(const TokenSpan&) const = default;
};

std::string_view to_string(ModalityTag tag);
std::string_view to_string(SpanRole role);

/// Total number of positions covered by a span list laid end to end.
std::size_t total_length(const std::vector<TokenSpan>& spans);

}  // namespace loom
