#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "loom/core/types.hpp"
#include "loom/core/vocabulary.hpp"
#include "loom/model/autoencoder.hpp"
#include "loom/model/autograd.hpp"
#include "loom/model/config.hpp"
#include "loom/model/image.hpp"
#include "loom/scheduler/attention_mask.hpp"

namespace loom::model {

/// Precomputed per-frame inputs: raw semantic patches and latent tokens.
/// Frame index 0 marks a user-supplied reference image.
struct FrameTokens {
  int frame_index = 1;
  Matrix patches;        // semantic_tokens x (patch_size^2 * 3)
  Matrix latent_tokens;  // latent_tokens x latent_token_width
};

/// Noised latent to be denoised, in latent-token layout.
struct TargetTokens {
  int frame_index = 1;
  Matrix noised_tokens;
  double tau = 1.0;
};

/// Everything that goes into one packed sequence, before embedding.
struct PackRequest {
  std::vector<TokenId> prompt;  // PROMPT span (never empty)
  std::vector<TokenId> plan;    // PLAN span: the full plan, may be empty
  std::vector<TokenId> step;    // PLAN span: current-step description, may be empty
  std::vector<FrameTokens> history;
  std::optional<TargetTokens> target;
};

/// Embedded sequence with its layout and noise-isolating mask.
struct PackedBatch {
  Var embeddings;
  std::vector<TokenSpan> spans;
  scheduler::AttentionMask mask;
  std::optional<double> tau;
  std::size_t text_length = 0;
};

/// Tiny unified transformer: text embeddings, a patch-projection semantic
/// encoder, latent token projection, learnable temporal embeddings, a stack of
/// pre-norm masked attention blocks, a text head and a flow-velocity head.
class LoomModel {
 public:
  LoomModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  TinyAutoencoder autoencoder() const {
    return TinyAutoencoder(config_, const_cast<ParameterStore&>(params_));
  }

  Latent encode_latent(const Image& image) const { return autoencoder().encode_latent(image); }
  Image decode_latent(const Latent& latent) const { return autoencoder().decode_latent(latent); }

  /// Patch projection without positional addition: one row per patch.
  Matrix encode_semantic(const Image& image) const;
  /// tokens + e_t on every row; t must lie in [1, t_max].
  Matrix add_temporal_embedding(const Matrix& tokens, int t) const;

  Matrix image_patches(const Image& image) const;
  Matrix latent_to_tokens(const Latent& latent) const;
  Latent tokens_to_latent(const Matrix& tokens) const;
  FrameTokens frame_tokens(const Image& image, int frame_index) const;
  FrameTokens frame_tokens(const Image& image, const Latent& latent, int frame_index) const;

  /// Embeds a request. Ablation switches in the config drop the step span,
  /// the history frames, or the temporal embeddings here.
  PackedBatch pack(Graph& g, const PackRequest& request) const;
  PackedBatch pack(Graph& g, Var embeddings, std::vector<TokenSpan> spans,
                   std::optional<double> tau) const;

  /// Masked multi-head attention stack; returns final-normed hidden states.
  Var mma_forward(Graph& g, const PackedBatch& batch) const;
  /// Velocity in latent-token layout for the noised span.
  Var predict_velocity(Graph& g, const PackedBatch& batch, Var hidden) const;
  /// Logits for the given hidden rows.
  Var predict_text_logits(Graph& g, Var hidden_rows) const;

  Var param(Graph& g, const std::string& name) const;
  /// Token embeddings of one clean frame span, temporal stamp included.
  Var embed_frame(Graph& g, const FrameTokens& frame) const;

 private:
  void init_parameters(std::uint64_t seed);
  Var time_features(Graph& g, double tau) const;
  Var embed_target(Graph& g, const TargetTokens& target) const;
  Var temporal_row(Graph& g, int t) const;

  ModelConfig config_;
  ParameterStore params_;
};

/// Sinusoidal features of tau, 1 x n.
Matrix sinusoidal_features(double tau, int n);

}  // namespace loom::model
