#pragma once

#include <span>

#include "loom/model/autograd.hpp"
#include "loom/model/config.hpp"
#include "loom/model/image.hpp"

namespace loom::model {

/// Two strided 2x2 convolutions down (32x32x3 -> 16x16xH -> 8x8xC) and two
/// transposed ones up. Stands in for a pretrained, frozen VAE: it is fitted
/// once on toy frames with a plain reconstruction loss and then frozen.
///
/// Latents are reported normalized by per-channel statistics gathered after
/// fitting, so noise and data share a scale during flow matching.
class TinyAutoencoder {
 public:
  static void register_parameters(ParameterStore& store, const ModelConfig& cfg,
                                  std::uint64_t seed);

  TinyAutoencoder(const ModelConfig& cfg, ParameterStore& store) : cfg_(cfg), store_(&store) {}

  Var encode(Graph& g, const Image& image) const;    // normalized latent cells
  Var decode(Graph& g, Var latent_cells) const;      // pixels in [0,1]
  Var encode_raw(Graph& g, const Image& image) const;

  Latent encode_latent(const Image& image) const;
  Image decode_latent(const Latent& latent) const;

  /// Mean squared reconstruction error over a batch, differentiable.
  Var reconstruction_loss(Graph& g, std::span<const Image> images) const;

  /// Sets the normalization statistics from raw encodings of `images`.
  void fit_latent_statistics(std::span<const Image> images);

  void set_trainable(bool trainable);

 private:
  Var p(Graph& g, const char* name) const;
  void check_image(const Image& image) const;

  ModelConfig cfg_;
  ParameterStore* store_;
};

}  // namespace loom::model
