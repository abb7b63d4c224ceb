#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "loom/model/image.hpp"

namespace loom::toyworld {

using model::Image;

inline constexpr int kCanvasSize = 32;

enum class Subject { Circle, Square, Star, House, Cup };
enum class Color { Red, Green, Blue, Yellow, Purple, Orange };

inline constexpr std::array kSubjects = {Subject::Circle, Subject::Square, Subject::Star,
                                         Subject::House, Subject::Cup};
inline constexpr std::array kColors = {Color::Red,    Color::Green,  Color::Blue,
                                       Color::Yellow, Color::Purple, Color::Orange};

std::string_view to_string(Subject s);
std::string_view to_string(Color c);
Subject subject_from_string(std::string_view s);
Color color_from_string(std::string_view s);

/// 8-bit exact RGB, so PNG round trips are lossless.
struct Rgb {
  int r, g, b;
};
Rgb rgb_of(Color c);
inline constexpr Rgb kInk{26, 26, 26};
inline constexpr Rgb kPaper{255, 255, 255};

void set_pixel(Image& img, int x, int y, Rgb c);
Rgb get_pixel(const Image& img, int x, int y);

/// Pixel index lists (y * size + x) describing one drawn subject.
struct SubjectGeometry {
  std::vector<int> outline;  // ordered clockwise from 12 o'clock
  std::vector<int> fill;     // interior, excludes outline
  std::vector<int> details;  // subset of fill, drawn in ink last
  std::vector<int> subject;  // outline + fill, sorted

  std::size_t area() const { return subject.size(); }
};

/// Rasterizes subject `s` centered at (cx, cy) with radius `radius`. Pure
/// function of its arguments and translation-equivariant in (cx, cy).
SubjectGeometry make_geometry(Subject s, int cx, int cy, int radius, int size = kCanvasSize);

/// Draws the first `outline_count` outline pixels, optionally the fill and
/// the details, onto `img`.
void draw_subject(Image& img, const SubjectGeometry& geom, Color color, std::size_t outline_count,
                  bool filled, bool detailed);

/// Rounds every channel to the nearest multiple of 1/255.
void quantize(Image& img);

}  // namespace loom::toyworld
