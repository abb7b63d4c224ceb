#include "loom/toyworld/style.hpp"

#include <algorithm>
#include <random>

#include "loom/core/error.hpp"
#include "loom/core/random.hpp"
#include "loom/toyworld/tutorial.hpp"

namespace loom::toyworld {

std::string_view to_string(StyleFilter f) {
  switch (f) {
    case StyleFilter::Original: return "original";
    case StyleFilter::Grayscale: return "grayscale";
    case StyleFilter::Inverted: return "inverted";
    case StyleFilter::Warm: return "warm";
    case StyleFilter::Cool: return "cool";
    case StyleFilter::Dotted: return "dotted";
  }
  return "?";
}

StyleFilter style_from_string(std::string_view s) {
  for (auto f : kStyleFilters) {
    if (to_string(f) == s) return f;
  }
  throw ParseError("unknown style: " + std::string(s));
}

Image apply_style(const Image& content, StyleFilter filter) {
  Image out = content;
  const int n = content.size;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      Rgb p = get_pixel(content, x, y);
      switch (filter) {
        case StyleFilter::Original:
          break;
        case StyleFilter::Grayscale: {
          const int v = (299 * p.r + 587 * p.g + 114 * p.b + 500) / 1000;
          p = {v, v, v};
          break;
        }
        case StyleFilter::Inverted:
          p = {255 - p.r, 255 - p.g, 255 - p.b};
          break;
        case StyleFilter::Warm:
          p = {std::min(255, p.r + 40), p.g, std::max(0, p.b - 40)};
          break;
        case StyleFilter::Cool:
          p = {std::max(0, p.r - 40), p.g, std::min(255, p.b + 40)};
          break;
        case StyleFilter::Dotted:
          if (x % 3 == 1 && y % 3 == 1) p = kInk;
          break;
      }
      set_pixel(out, x, y, p);
    }
  }
  if (filter == StyleFilter::Original) return content;
  return out;
}

StyleTriplet gen_style_triplet(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {0x57u}));
  return gen_style_triplet(seed, kStyleFilters[rng() % kStyleFilters.size()]);
}

StyleTriplet gen_style_triplet(std::uint64_t seed, StyleFilter filter) {
  const auto content_spec = sample_tutorial_spec(derive_seed(seed, {0x58u}));
  auto style_spec = sample_tutorial_spec(derive_seed(seed, {0x59u}));
  if (style_spec.subject == content_spec.subject) {
    style_spec.subject = kSubjects[(static_cast<std::size_t>(content_spec.subject) + 1) % kSubjects.size()];
  }
  StyleTriplet out;
  out.filter = filter;
  out.subject = content_spec.subject;
  out.content = render_tutorial(content_spec).final_frame();
  out.style_reference = apply_style(render_tutorial(style_spec).final_frame(), filter);
  out.output = apply_style(out.content, filter);
  out.prompt = "redraw the " + std::string(to_string(out.subject)) + " in the " +
               std::string(to_string(filter)) + " style";
  return out;
}

}  // namespace loom::toyworld
