#pragma once

#include <filesystem>

#include "loom/model/image.hpp"

namespace loom::toyworld {

/// 8-bit RGB PNG. Values are clamped to [0,1] and rounded to 1/255.
void write_png(const std::filesystem::path& path, const model::Image& image);
model::Image read_png(const std::filesystem::path& path);

/// 8-bit grayscale PNG, 255 inside and 0 outside.
void write_mask_png(const std::filesystem::path& path, const model::RegionMask& mask);
model::RegionMask read_mask_png(const std::filesystem::path& path);

/// Writes an arbitrary-size RGB buffer (rows of width*3 bytes).
void write_rgb_png(const std::filesystem::path& path, int width, int height,
                   const std::vector<unsigned char>& rgb);

}  // namespace loom::toyworld
