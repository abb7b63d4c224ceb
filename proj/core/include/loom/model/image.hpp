#pragma once

#include <vector>

#include "loom/model/autograd.hpp"

namespace loom::model {

/// Square RGB image in [0,1]. pixels has one row per pixel (row-major,
/// y * size + x) and three columns.
struct Image {
  int size = 0;
  Matrix pixels;

  static Image filled(int size, double r, double g, double b);
  double& at(int x, int y, int c) { return pixels(y * size + x, c); }
  double at(int x, int y, int c) const { return pixels(y * size + x, c); }
  bool operator==(const Image& o) const { return size == o.size && pixels == o.pixels; }
};

/// Latent grid: one row per cell (row-major), `channels` columns.
struct Latent {
  int grid = 0;
  int channels = 0;
  Matrix cells;

  bool operator==(const Latent& o) const {
    return grid == o.grid && channels == o.channels && cells == o.cells;
  }
};

/// Boolean grid over latent cells, row-major.
struct RegionMask {
  int grid = 0;
  std::vector<bool> inside;
};

/// Flat gather indices turning an (h*w) x c cell grid into (h/p * w/p)
/// patches of p*p*c values, ordered (dy, dx, channel) within a patch.
std::vector<int> patchify_index(int h, int w, int c, int p);
/// Inverse permutation of patchify_index.
std::vector<int> unpatchify_index(int h, int w, int c, int p);

Matrix patchify(const Matrix& cells, int h, int w, int p);
Matrix unpatchify(const Matrix& patches, int h, int w, int p);

/// Mean squared difference over all pixels and channels.
double mean_squared_error(const Matrix& a, const Matrix& b);

}  // namespace loom::model
