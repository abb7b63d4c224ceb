#include "loom/scheduler/attention_mask.hpp"

#include "loom/core/error.hpp"

namespace loom::scheduler {

std::string AttentionMask::to_golden() const {
  std::string out;
  out.reserve(n_ * (n_ + 1));
  for (std::size_t q = 0; q < n_; ++q) {
    for (std::size_t k = 0; k < n_; ++k) out.push_back(allowed(q, k) ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

AttentionMask AttentionMask::from_golden(std::string_view text) {
  std::vector<std::string_view> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto row = text.substr(pos, nl - pos);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (!row.empty()) rows.push_back(row);
    pos = nl + 1;
  }
  AttentionMask mask(rows.size());
  for (std::size_t q = 0; q < rows.size(); ++q) {
    if (rows[q].size() != rows.size()) throw ShapeError("golden mask is not square");
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const char c = rows[q][k];
      if (c != '0' && c != '1') throw ParseError("golden mask must contain only 0/1");
      mask.set(q, k, c == '1');
    }
  }
  return mask;
}

void validate_layout(const std::vector<TokenSpan>& spans) {
  if (spans.empty()) throw LayoutError("layout has no spans");
  // 0 = text, 1 = clean history, 2 = noised target
  int phase = 0;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    const auto where = "span " + std::to_string(i) + ": ";
    if (s.start != cursor) throw LayoutError(where + "spans must be contiguous and start at 0");
    if (s.length == 0) throw LayoutError(where + "empty span");
    cursor += s.length;
    int p = 0;
    switch (s.tag) {
      case ModalityTag::Text:
        if (s.role != SpanRole::Prompt && s.role != SpanRole::Plan) {
          throw LayoutError(where + "text span must have role PROMPT or PLAN");
        }
        p = 0;
        break;
      case ModalityTag::CleanVisual:
        if (s.role != SpanRole::HistoryFrame) {
          throw LayoutError(where + "clean visual span must have role HISTORY_FRAME");
        }
        p = 1;
        break;
      case ModalityTag::NoisedLatent:
        if (s.role != SpanRole::TargetFrame) {
          throw LayoutError(where + "noised span must have role TARGET_FRAME");
        }
        p = 2;
        break;
    }
    if (p < phase) throw LayoutError(where + "out of order (text, history frames, target)");
    if (p == 2 && phase == 2) throw LayoutError(where + "more than one noised target span");
    if (s.tag != ModalityTag::Text && !s.frame_index) {
      throw LayoutError(where + "visual span without frame index");
    }
    phase = p;
  }
}

AttentionMask build_attention_mask(const std::vector<TokenSpan>& spans) {
  validate_layout(spans);
  const std::size_t n = total_length(spans);
  AttentionMask mask(n);

  std::size_t text_end = 0;
  std::size_t clean_end = 0;
  for (const auto& s : spans) {
    if (s.tag == ModalityTag::Text) text_end = s.end();
    if (s.tag != ModalityTag::NoisedLatent) clean_end = s.end();
  }

  for (const auto& s : spans) {
    for (std::size_t q = s.start; q < s.end(); ++q) {
      switch (s.tag) {
        case ModalityTag::Text:
          for (std::size_t k = 0; k <= q; ++k) mask.set(q, k, true);
          break;
        case ModalityTag::CleanVisual:
          for (std::size_t k = 0; k < text_end; ++k) mask.set(q, k, true);
          for (std::size_t k = s.start; k < s.end(); ++k) mask.set(q, k, true);
          break;
        case ModalityTag::NoisedLatent:
          for (std::size_t k = 0; k < clean_end; ++k) mask.set(q, k, true);
          for (std::size_t k = s.start; k < s.end(); ++k) mask.set(q, k, true);
          break;
      }
    }
  }
  return mask;
}

}  // namespace loom::scheduler
