#include "loom/model/config.hpp"

#include <sstream>

#include "loom/core/error.hpp"
#include "loom/core/vocabulary.hpp"

namespace loom::model {

std::string Ablation::name() const {
  std::string out;
  auto add = [&](const char* part) {
    if (!out.empty()) out += "+";
    out += part;
  };
  if (!temporal_embedding) add("no-time");
  if (!stepwise_prompt) add("no-stepwise");
  if (!reference_sampling) add("no-reference");
  return out.empty() ? "full" : out;
}

Ablation Ablation::parse(const std::string& name) {
  Ablation a;
  if (name == "full" || name.empty()) return a;
  std::stringstream ss(name);
  std::string part;
  while (std::getline(ss, part, '+')) {
    if (part == "no-time") {
      a.temporal_embedding = false;
    } else if (part == "no-stepwise") {
      a.stepwise_prompt = false;
    } else if (part == "no-reference") {
      a.reference_sampling = false;
    } else {
      throw ConfigError("unknown ablation '" + part + "'");
    }
  }
  return a;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || ffn_mult <= 0) fail("sizes must be positive");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (image_size <= 0 || image_size % patch_size != 0) fail("image_size must be divisible by patch_size");
  if (image_size % 4 != 0 || image_size / 4 != latent_grid) {
    fail("latent_grid must equal image_size / 4 (two stride-2 stages)");
  }
  if (latent_grid % latent_patch != 0) fail("latent_grid must be divisible by latent_patch");
  if (latent_channels <= 0 || ae_hidden <= 0) fail("autoencoder widths must be positive");
  if (vocab_size <= special::kCount) fail("vocab_size must cover the reserved ids");
  if (t_max < 1) fail("t_max must be >= 1");
  if (max_text_len < 2) fail("max_text_len too small");
  if (time_features < 2 || time_features % 2 != 0) fail("time_features must be even");
  if (init_scale <= 0.0) fail("init_scale must be positive");
}

}  // namespace loom::model
