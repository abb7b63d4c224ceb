#pragma once

#include <cstdint>
#include <string>

#include "loom/toyworld/canvas.hpp"

namespace loom::toyworld {

enum class StyleFilter { Original, Grayscale, Inverted, Warm, Cool, Dotted };

inline constexpr std::array kStyleFilters = {StyleFilter::Original, StyleFilter::Grayscale,
                                             StyleFilter::Inverted, StyleFilter::Warm,
                                             StyleFilter::Cool,     StyleFilter::Dotted};

std::string_view to_string(StyleFilter f);
StyleFilter style_from_string(std::string_view s);

/// Deterministic per-pixel 8-bit filter.
Image apply_style(const Image& content, StyleFilter filter);

struct StyleTriplet {
  Image content;
  Image style_reference;  // the same filter applied to a different subject
  Image output;
  StyleFilter filter = StyleFilter::Original;
  Subject subject = Subject::Circle;
  std::string prompt;
};

StyleTriplet gen_style_triplet(std::uint64_t seed);
StyleTriplet gen_style_triplet(std::uint64_t seed, StyleFilter filter);

}  // namespace loom::toyworld
