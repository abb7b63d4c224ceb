#pragma once

#include <string>

namespace loom::model {

/// Component switches used to train the ablated variants.
struct Ablation {
  bool temporal_embedding = true;  // e_t added to frame tokens
  bool stepwise_prompt = true;     // current-step description packed after the plan
  bool reference_sampling = true;  // history frames and reference images packed

  bool operator==(const Ablation&) const = default;
  /// "full", "no-time", "no-stepwise", "no-reference" or a '+'-joined mix.
  std::string name() const;
  static Ablation parse(const std::string& name);
};

struct ModelConfig {
  int d_model = 128;
  int n_heads = 4;
  int n_layers = 4;
  int ffn_mult = 4;
  int image_size = 32;
  int latent_grid = 8;
  int latent_channels = 4;
  int latent_patch = 2;   // latent cells per token edge
  int patch_size = 8;     // semantic patch edge in pixels
  int ae_hidden = 32;     // autoencoder intermediate channels
  int vocab_size = 0;
  int t_max = 8;
  int max_text_len = 96;
  int time_features = 32;
  double init_scale = 1.0;
  Ablation ablation;

  int semantic_tokens() const { return (image_size / patch_size) * (image_size / patch_size); }
  int latent_tokens() const { return (latent_grid / latent_patch) * (latent_grid / latent_patch); }
  int latent_token_width() const { return latent_patch * latent_patch * latent_channels; }
  int frame_tokens() const { return semantic_tokens() + latent_tokens(); }

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

}  // namespace loom::model
