#include "loom/toyworld/canvas.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "loom/core/error.hpp"

namespace loom::toyworld {

std::string_view to_string(Subject s) {
  switch (s) {
    case Subject::Circle: return "circle";
    case Subject::Square: return "square";
    case Subject::Star: return "star";
    case Subject::House: return "house";
    case Subject::Cup: return "cup";
  }
  return "?";
}

std::string_view to_string(Color c) {
  switch (c) {
    case Color::Red: return "red";
    case Color::Green: return "green";
    case Color::Blue: return "blue";
    case Color::Yellow: return "yellow";
    case Color::Purple: return "purple";
    case Color::Orange: return "orange";
  }
  return "?";
}

Subject subject_from_string(std::string_view s) {
  for (auto v : kSubjects) {
    if (to_string(v) == s) return v;
  }
  throw ParseError("unknown subject: " + std::string(s));
}

Color color_from_string(std::string_view s) {
  for (auto v : kColors) {
    if (to_string(v) == s) return v;
  }
  throw ParseError("unknown color: " + std::string(s));
}

Rgb rgb_of(Color c) {
  switch (c) {
    case Color::Red: return {230, 26, 26};
    case Color::Green: return {26, 191, 26};
    case Color::Blue: return {26, 51, 230};
    case Color::Yellow: return {242, 217, 26};
    case Color::Purple: return {153, 26, 204};
    case Color::Orange: return {255, 140, 0};
  }
  return kInk;
}

void set_pixel(Image& img, int x, int y, Rgb c) {
  img.at(x, y, 0) = c.r / 255.0;
  img.at(x, y, 1) = c.g / 255.0;
  img.at(x, y, 2) = c.b / 255.0;
}

Rgb get_pixel(const Image& img, int x, int y) {
  auto q = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  return {q(img.at(x, y, 0)), q(img.at(x, y, 1)), q(img.at(x, y, 2))};
}

namespace {

using Inside = std::function<bool(double dx, double dy)>;

// Shape membership in coordinates relative to the center, y pointing down.
Inside shape_fn(Subject s, double r) {
  switch (s) {
    case Subject::Circle:
      return [r](double dx, double dy) { return dx * dx + dy * dy <= r * r; };
    case Subject::Square:
      return [r](double dx, double dy) { return std::abs(dx) <= 0.8 * r && std::abs(dy) <= 0.8 * r; };
    case Subject::Star:
      return [r](double dx, double dy) {
        const double rho = std::hypot(dx, dy);
        const double theta = std::atan2(dx, -dy);
        return rho <= r * (0.7 + 0.3 * std::cos(5.0 * theta));
      };
    case Subject::House:
      return [r](double dx, double dy) {
        const bool body = std::abs(dx) <= 0.7 * r && dy >= -0.1 * r && dy <= 0.85 * r;
        const bool roof = dy >= -0.95 * r && dy < -0.1 * r &&
                          std::abs(dx) <= 0.95 * r * (dy + 0.95 * r) / (0.85 * r);
        return body || roof;
      };
    case Subject::Cup:
      return [r](double dx, double dy) {
        const bool body = std::abs(dx + 0.15 * r) <= 0.6 * r && dy >= -0.65 * r && dy <= 0.7 * r;
        const double hx = dx - 0.45 * r;
        const double hr = std::hypot(hx, dy);
        const bool handle = hx > 0.0 && hr >= 0.2 * r && hr <= 0.45 * r;
        return body || handle;
      };
  }
  return [](double, double) { return false; };
}

std::vector<std::pair<int, int>> detail_offsets(Subject s, int r) {
  std::vector<std::pair<int, int>> out;
  auto block = [&](int x0, int y0, int w, int h) {
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) out.emplace_back(x, y);
    }
  };
  switch (s) {
    case Subject::Circle:
    case Subject::Star:
      block(-1, -1, 3, 3);
      break;
    case Subject::Square:
      for (int i = -r / 2; i <= r / 2; ++i) {
        out.emplace_back(i, i);
        out.emplace_back(i + 1, i);
      }
      break;
    case Subject::House:
      block(-1, r / 3, 3, r / 2);
      break;
    case Subject::Cup:
      block(-r / 2, -1, r, 2);
      break;
  }
  return out;
}

}  // namespace

SubjectGeometry make_geometry(Subject s, int cx, int cy, int radius, int size) {
  const auto inside = shape_fn(s, static_cast<double>(radius));
  auto in = [&](int x, int y) { return inside(static_cast<double>(x - cx), static_cast<double>(y - cy)); };

  SubjectGeometry geom;
  std::vector<std::pair<double, int>> outline_keyed;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (!in(x, y)) continue;
      bool border = false;
      for (int dy = -2; dy <= 2 && !border; ++dy) {
        for (int dx = -2; dx <= 2 && !border; ++dx) {
          if (std::abs(dx) + std::abs(dy) <= 2 && !in(x + dx, y + dy)) border = true;
        }
      }
      const int idx = y * size + x;
      if (border) {
        // clockwise angle from 12 o'clock in [0, 2pi)
        double a = std::atan2(static_cast<double>(x - cx), static_cast<double>(cy - y));
        if (a < 0) a += 2.0 * std::numbers::pi;
        outline_keyed.emplace_back(a, idx);
      } else {
        geom.fill.push_back(idx);
      }
    }
  }
  std::sort(outline_keyed.begin(), outline_keyed.end());
  for (const auto& [a, idx] : outline_keyed) geom.outline.push_back(idx);

  std::vector<bool> is_fill(static_cast<std::size_t>(size * size), false);
  for (int idx : geom.fill) is_fill[static_cast<std::size_t>(idx)] = true;
  for (const auto& [dx, dy] : detail_offsets(s, radius)) {
    const int x = cx + dx;
    const int y = cy + dy;
    if (x < 0 || y < 0 || x >= size || y >= size) continue;
    const int idx = y * size + x;
    if (is_fill[static_cast<std::size_t>(idx)]) geom.details.push_back(idx);
  }
  std::sort(geom.details.begin(), geom.details.end());
  geom.details.erase(std::unique(geom.details.begin(), geom.details.end()), geom.details.end());

  geom.subject = geom.outline;
  geom.subject.insert(geom.subject.end(), geom.fill.begin(), geom.fill.end());
  std::sort(geom.subject.begin(), geom.subject.end());
  return geom;
}

void draw_subject(Image& img, const SubjectGeometry& geom, Color color, std::size_t outline_count,
                  bool filled, bool detailed) {
  const int size = img.size;
  auto put = [&](int idx, Rgb c) { set_pixel(img, idx % size, idx / size, c); };
  outline_count = std::min(outline_count, geom.outline.size());
  for (std::size_t i = 0; i < outline_count; ++i) put(geom.outline[i], kInk);
  if (filled) {
    for (int idx : geom.fill) put(idx, rgb_of(color));
  }
  if (detailed) {
    for (int idx : geom.details) put(idx, kInk);
  }
}

void quantize(Image& img) {
  img.pixels = img.pixels.unaryExpr([](double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; });
}

}  // namespace loom::toyworld
