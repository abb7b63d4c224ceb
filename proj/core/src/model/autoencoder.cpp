#include "loom/model/autoencoder.hpp"

#include <cmath>
#include <random>

#include "loom/core/error.hpp"

namespace loom::model {

namespace {

Matrix gaussian(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

void TinyAutoencoder::register_parameters(ParameterStore& store, const ModelConfig& cfg,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xae5eedULL);
  const int h = cfg.ae_hidden;
  const int c = cfg.latent_channels;
  store.add("ae.enc1.w", gaussian(12, h, 1.0 / std::sqrt(12.0), rng));
  store.add("ae.enc1.b", Matrix::Zero(1, h), false);
  store.add("ae.enc2.w", gaussian(4 * h, c, 1.0 / std::sqrt(4.0 * h), rng));
  store.add("ae.enc2.b", Matrix::Zero(1, c), false);
  store.add("ae.dec1.w", gaussian(c, 4 * h, 1.0 / std::sqrt(static_cast<double>(c)), rng));
  store.add("ae.dec1.b", Matrix::Zero(1, 4 * h), false);
  store.add("ae.dec2.w", gaussian(h, 12, 1.0 / std::sqrt(static_cast<double>(h)), rng));
  store.add("ae.dec2.b", Matrix::Zero(1, 12), false);
  auto& mean = store.add("ae.latent_mean", Matrix::Zero(1, c), false);
  auto& stdv = store.add("ae.latent_std", Matrix::Ones(1, c), false);
  mean.trainable = false;
  stdv.trainable = false;
}

Var TinyAutoencoder::p(Graph& g, const char* name) const {
  auto& param = store_->get(name);
  return g.grad_enabled() ? g.param(param) : g.constant(param.value);
}

void TinyAutoencoder::check_image(const Image& image) const {
  if (image.size != cfg_.image_size || image.pixels.rows() != cfg_.image_size * cfg_.image_size ||
      image.pixels.cols() != 3) {
    throw ShapeError("image must be " + std::to_string(cfg_.image_size) + "x" +
                     std::to_string(cfg_.image_size) + "x3");
  }
}

Var TinyAutoencoder::encode_raw(Graph& g, const Image& image) const {
  check_image(image);
  const int s = cfg_.image_size;
  const int h = cfg_.ae_hidden;
  Var x = g.constant(patchify(image.pixels, s, s, 2));
  x = gelu(add_row(matmul(x, p(g, "ae.enc1.w")), p(g, "ae.enc1.b")));
  const auto idx = patchify_index(s / 2, s / 2, h, 2);
  x = gather(x, idx, (s / 4) * (s / 4), 4 * h);
  return add_row(matmul(x, p(g, "ae.enc2.w")), p(g, "ae.enc2.b"));
}

Var TinyAutoencoder::encode(Graph& g, const Image& image) const {
  const Var raw = encode_raw(g, image);
  const auto& mean = store_->get("ae.latent_mean").value;
  const auto& stdv = store_->get("ae.latent_std").value;
  Matrix shift = -mean.cwiseQuotient(stdv);
  Matrix inv = stdv.cwiseInverse();
  Matrix inv_diag = inv.row(0).asDiagonal().toDenseMatrix();
  return add_row(matmul(raw, g.constant(inv_diag)), g.constant(shift));
}

Var TinyAutoencoder::decode(Graph& g, Var latent_cells) const {
  const int s = cfg_.image_size;
  const int h = cfg_.ae_hidden;
  const int grid = s / 4;
  if (latent_cells.rows() != grid * grid || latent_cells.cols() != cfg_.latent_channels) {
    throw ShapeError("latent must be " + std::to_string(grid) + "x" + std::to_string(grid) + "x" +
                     std::to_string(cfg_.latent_channels));
  }
  const auto& mean = store_->get("ae.latent_mean").value;
  const auto& stdv = store_->get("ae.latent_std").value;
  Matrix diag = stdv.row(0).asDiagonal().toDenseMatrix();
  Var z = add_row(matmul(latent_cells, g.constant(diag)), g.constant(mean));
  Var x = add_row(matmul(z, p(g, "ae.dec1.w")), p(g, "ae.dec1.b"));
  x = gather(x, unpatchify_index(s / 2, s / 2, h, 2), (s / 2) * (s / 2), h);
  x = gelu(x);
  x = add_row(matmul(x, p(g, "ae.dec2.w")), p(g, "ae.dec2.b"));
  x = gather(x, unpatchify_index(s, s, 3, 2), s * s, 3);
  return sigmoid(x);
}

Latent TinyAutoencoder::encode_latent(const Image& image) const {
  Graph g(false);
  return Latent{cfg_.latent_grid, cfg_.latent_channels, encode(g, image).value()};
}

Image TinyAutoencoder::decode_latent(const Latent& latent) const {
  if (latent.grid != cfg_.latent_grid || latent.channels != cfg_.latent_channels) {
    throw ShapeError("latent grid/channels do not match the model");
  }
  Graph g(false);
  return Image{cfg_.image_size, decode(g, g.constant(latent.cells)).value()};
}

Var TinyAutoencoder::reconstruction_loss(Graph& g, std::span<const Image> images) const {
  if (images.empty()) throw Error("reconstruction_loss: empty batch");
  std::vector<Var> terms;
  double count = 0.0;
  for (const auto& img : images) {
    const Var rec = decode(g, encode(g, img));
    terms.push_back(squared_error_sum(rec, img.pixels));
    count += static_cast<double>(img.pixels.size());
  }
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return scale(total, 1.0 / count);
}

void TinyAutoencoder::fit_latent_statistics(std::span<const Image> images) {
  if (images.empty()) throw Error("fit_latent_statistics: no images");
  const int c = cfg_.latent_channels;
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(c);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(c);
  double n = 0.0;
  for (const auto& img : images) {
    Graph g(false);
    const Matrix raw = encode_raw(g, img).value();
    sum += raw.colwise().sum();
    sq += raw.array().square().matrix().colwise().sum();
    n += static_cast<double>(raw.rows());
  }
  Matrix mean = sum / n;
  Matrix var = (sq / n).array() - mean.array().square();
  store_->get("ae.latent_mean").value = mean;
  store_->get("ae.latent_std").value = var.array().max(1e-8).sqrt().matrix();
}

void TinyAutoencoder::set_trainable(bool trainable) {
  for (const char* name : {"ae.enc1.w", "ae.enc1.b", "ae.enc2.w", "ae.enc2.b", "ae.dec1.w",
                           "ae.dec1.b", "ae.dec2.w", "ae.dec2.b"}) {
    store_->get(name).trainable = trainable;
  }
}

}  // namespace loom::model
