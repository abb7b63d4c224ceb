#include "loom/toyworld/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include "loom/core/error.hpp"

namespace loom::toyworld {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void on_png_warning(png_structp, png_const_charp) {}

void write_raw(const std::filesystem::path& path, int width, int height, int color_type,
               const std::vector<unsigned char>& data) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, on_png_warning);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encoding failed: " + path.string());
  }
  {
    const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
      png_write_row(png, data.data() + static_cast<std::size_t>(y) * width * channels);
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
}

std::vector<unsigned char> read_raw(const std::filesystem::path& path, int& width, int& height,
                                    int want_channels) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot read " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, on_png_warning);
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> out;
  bool bad_channels = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png decoding failed: " + path.string());
  }
  {
    png_init_io(png, f.get());
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int ct = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (ct == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (ct & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (want_channels == 3 && (ct == PNG_COLOR_TYPE_GRAY || ct == PNG_COLOR_TYPE_GRAY_ALPHA)) {
      png_set_gray_to_rgb(png);
    }
    if (want_channels == 1 && (ct & PNG_COLOR_MASK_COLOR)) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);
    bad_channels = static_cast<int>(png_get_channels(png, info)) != want_channels;
  }
  if (bad_channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unexpected channel count in " + path.string());
  }
  {
    out.resize(static_cast<std::size_t>(width) * height * want_channels);
    for (int y = 0; y < height; ++y) {
      png_read_row(png, out.data() + static_cast<std::size_t>(y) * width * want_channels, nullptr);
    }
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace

void write_rgb_png(const std::filesystem::path& path, int width, int height,
                   const std::vector<unsigned char>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw ShapeError("rgb buffer size");
  write_raw(path, width, height, PNG_COLOR_TYPE_RGB, rgb);
}

void write_png(const std::filesystem::path& path, const model::Image& image) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(image.size) * image.size * 3);
  for (Eigen::Index i = 0; i < image.pixels.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(image.pixels(i, c), 0.0, 1.0);
      buf[static_cast<std::size_t>(i) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  write_raw(path, image.size, image.size, PNG_COLOR_TYPE_RGB, buf);
}

model::Image read_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto buf = read_raw(path, w, h, 3);
  if (w != h) throw ShapeError("non-square image: " + path.string());
  model::Image img;
  img.size = w;
  img.pixels.resize(static_cast<Eigen::Index>(w) * h, 3);
  for (Eigen::Index i = 0; i < img.pixels.rows(); ++i) {
    for (int c = 0; c < 3; ++c) img.pixels(i, c) = buf[static_cast<std::size_t>(i) * 3 + c] / 255.0;
  }
  return img;
}

void write_mask_png(const std::filesystem::path& path, const model::RegionMask& mask) {
  std::vector<unsigned char> buf(mask.inside.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask.inside[i] ? 255 : 0;
  write_raw(path, mask.grid, mask.grid, PNG_COLOR_TYPE_GRAY, buf);
}

model::RegionMask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto buf = read_raw(path, w, h, 1);
  if (w != h) throw ShapeError("non-square mask: " + path.string());
  model::RegionMask mask;
  mask.grid = w;
  mask.inside.resize(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) mask.inside[i] = buf[i] >= 128;
  return mask;
}

}  // namespace loom::toyworld
