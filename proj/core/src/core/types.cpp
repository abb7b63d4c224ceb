#include "loom/core/types.hpp"

namespace loom {

std::string_view to_string(ModalityTag tag) {
  switch (tag) {
    case ModalityTag::Text: return "TEXT";
    case ModalityTag::CleanVisual: return "CLEAN_VISUAL";
    case ModalityTag::NoisedLatent: return "NOISED_LATENT";
  }
  return "?";
}

std::string_view to_string(SpanRole role) {
  switch (role) {
    case SpanRole::Prompt: return "PROMPT";
    case SpanRole::Plan: return "PLAN";
    case SpanRole::HistoryFrame: return "HISTORY_FRAME";
    case SpanRole::TargetFrame: return "TARGET_FRAME";
  }
  return "?";
}

std::size_t total_length(const std::vector<TokenSpan>& spans) {
  std::size_t n = 0;
  for (const auto& s : spans) n += s.length;
  return n;
}

}  // namespace loom
