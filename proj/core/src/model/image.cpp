#include "loom/model/image.hpp"

#include "loom/core/error.hpp"

namespace loom::model {

Image Image::filled(int size, double r, double g, double b) {
  Image img{size, Matrix(size * size, 3)};
  img.pixels.col(0).setConstant(r);
  img.pixels.col(1).setConstant(g);
  img.pixels.col(2).setConstant(b);
  return img;
}

std::vector<int> patchify_index(int h, int w, int c, int p) {
  if (p <= 0 || h % p != 0 || w % p != 0) throw ShapeError("patch size must divide the grid");
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(h * w * c));
  for (int py = 0; py < h / p; ++py) {
    for (int px = 0; px < w / p; ++px) {
      for (int dy = 0; dy < p; ++dy) {
        for (int dx = 0; dx < p; ++dx) {
          const int cell = (py * p + dy) * w + (px * p + dx);
          for (int ch = 0; ch < c; ++ch) idx.push_back(cell * c + ch);
        }
      }
    }
  }
  return idx;
}

std::vector<int> unpatchify_index(int h, int w, int c, int p) {
  const auto fwd = patchify_index(h, w, c, p);
  std::vector<int> inv(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) inv[static_cast<std::size_t>(fwd[i])] = static_cast<int>(i);
  return inv;
}

Matrix patchify(const Matrix& cells, int h, int w, int p) {
  const auto c = static_cast<int>(cells.cols());
  if (cells.rows() != h * w) throw ShapeError("patchify: cell count mismatch");
  const auto idx = patchify_index(h, w, c, p);
  Matrix out((h / p) * (w / p), p * p * c);
  for (std::size_t i = 0; i < idx.size(); ++i) out.data()[i] = cells.data()[idx[i]];
  return out;
}

Matrix unpatchify(const Matrix& patches, int h, int w, int p) {
  const auto c = static_cast<int>(patches.cols()) / (p * p);
  if (patches.rows() != (h / p) * (w / p) || patches.cols() != p * p * c) {
    throw ShapeError("unpatchify: patch shape mismatch");
  }
  const auto idx = unpatchify_index(h, w, c, p);
  Matrix out(h * w, c);
  for (std::size_t i = 0; i < idx.size(); ++i) out.data()[i] = patches.data()[idx[i]];
  return out;
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("mse: shape mismatch");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace loom::model
