#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "loom/core/error.hpp"
#include "loom/core/plan.hpp"
#include "loom/core/vocabulary.hpp"
#include "loom/inference/guidance.hpp"
#include "loom/model/transformer.hpp"

namespace loom::inference {

using model::Image;
using model::Latent;

/// <bos>, the scaffold, then the prompt: the text every plan is decoded from.
std::vector<TokenId> conditioning_prefix(const std::string& prompt, const Vocabulary& vocab);

/// One decoding pass; returns the raw token ids after the prefix, without <eos>.
std::vector<TokenId> decode_plan_tokens(const model::LoomModel& model, const std::vector<TokenId>& prefix,
                                        const DecodeMode& mode, std::uint64_t seed);

/// Decodes, parses and truncates a plan. Retries with temperature sampling
/// up to guidance.plan_retries times before raising PlanFormatError. Text
/// positions never attend to visual tokens, so a reference image is only
/// shape-checked here.
Plan generate_plan(const model::LoomModel& model, const Vocabulary& vocab, const std::string& prompt,
                   const std::optional<Image>& reference, const GuidanceConfig& guidance,
                   std::uint64_t seed);

struct RenderRequest {
  std::string prompt;
  Plan plan;
  int step = 1;
  std::vector<std::pair<int, Image>> history;  // (frame index, image)
  std::optional<Image> reference;
  std::optional<model::RegionMask> region;     // latent-grid mask for localized guidance
};

struct RenderedFrame {
  Image image;
  Latent latent;
};

/// Integrates the flow from seeded noise at tau = 1 to tau = 0 with
/// explicit Euler steps, guiding each velocity with an unconditional pass.
RenderedFrame render_frame(const model::LoomModel& model, const Vocabulary& vocab, const RenderRequest& request,
                           const GuidanceConfig& guidance, std::uint64_t seed);

/// The conditional request render_frame builds for one integration step.
model::PackRequest conditional_request(const model::LoomModel& model, const Vocabulary& vocab,
                                       const RenderRequest& request, const model::Matrix& noised_tokens,
                                       double tau);

struct FrameTrace {
  int step = 0;
  std::uint64_t seed = 0;
  std::vector<int> history;
  bool reference = false;
  std::string step_text;
  std::uint64_t plan_hash = 0;  // hash of the plan text that conditioned this frame
  double gamma = 1.0;
  double s_entity = 1.0;
  int ode_steps = 0;
};

struct InterleavedResult {
  std::string prompt;
  std::uint64_t seed = 0;
  int k_max = 2;
  Plan plan;
  std::vector<Image> frames;
  std::vector<Latent> latents;  // final integration state per frame; not serialized
  std::vector<FrameTrace> trace;
};

/// Carries everything produced before a frame failed.
class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, InterleavedResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const InterleavedResult& partial() const { return partial_; }

 private:
  InterleavedResult partial_;
};

/// Plan once, then render t = 1..N, each frame conditioned on previously
/// rendered frames chosen by sample_history(t-1, k_max).
InterleavedResult generate_interleaved(const model::LoomModel& model, const Vocabulary& vocab,
                                       const std::string& prompt, const std::optional<Image>& reference,
                                       const GuidanceConfig& guidance, std::uint64_t seed,
                                       const std::optional<model::RegionMask>& region = std::nullopt);

/// Renders every frame of a given plan (teacher-forced plan, rendered history).
InterleavedResult render_sequence(const model::LoomModel& model, const Vocabulary& vocab,
                                  const std::string& prompt, const Plan& plan,
                                  const std::optional<Image>& reference, const GuidanceConfig& guidance,
                                  std::uint64_t seed, const std::optional<model::RegionMask>& region = std::nullopt);

}  // namespace loom::inference
