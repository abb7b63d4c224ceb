#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loom/core/plan.hpp"
#include "loom/core/vocabulary.hpp"
#include "loom/model/transformer.hpp"

namespace loom::trainer {

using model::Image;
using model::Latent;
using model::Matrix;

/// Skeleton instruction prepended to every prompt.
inline constexpr const char* kScaffold = "make a plan then draw each step";

/// A raw interleaved sequence: prompt, plan, one frame per step, and an
/// optional reference image of the finished result.
struct Sequence {
  std::uint64_t id = 0;
  std::string prompt;
  Plan plan;
  std::vector<Image> frames;
  std::optional<Image> reference;
};

/// One frame with both of its visual encodings.
struct FrameRecord {
  int step = 0;  // 1-based; 0 for a reference image
  Image image;
  Latent latent;
  Matrix patches;  // raw semantic patches, projected inside the model
};

struct SequenceRecord {
  std::uint64_t id = 0;
  std::vector<TokenId> prompt;  // tokenized prompt, no scaffold
  Plan plan;
  std::vector<FrameRecord> frames;
  std::optional<FrameRecord> reference;
};

/// Tokenizes and encodes a sequence with the model's frozen autoencoder.
/// The plan is truncated to kMaxPlanSteps and frames beyond it dropped.
SequenceRecord encode_sequence(const Sequence& seq, const model::LoomModel& model,
                               const Vocabulary& vocab);

struct TrainingInstance {
  std::uint64_t sequence_id = 0;
  std::vector<TokenId> scaffold;      // skeleton instruction alone
  std::vector<TokenId> prompt;        // <bos> scaffold prompt
  std::vector<TokenId> plan;          // full rendered plan then <eos>: the text target
  std::vector<TokenId> step;          // description of the target step
  int target_frame = 1;
  int offset = 0;
  std::vector<int> history;           // 1-based frame indices
  bool use_reference = false;
  std::vector<model::FrameTokens> context;  // reference (frame 0) first, then history
  Latent target_latent;
  double tau = 0.0;
  Matrix noise;                       // same shape as target_latent.cells
  bool drop_text = false;
  bool drop_history = false;
};

struct InstanceOptions {
  int k_max = 2;
  double reference_rate = 0.5;  // chance of packing the reference image when one exists
};

/// Instance for frame t of `seq`. Every random draw comes from a stream keyed
/// by (seed, sequence id, t), so instances can be built in any order.
TrainingInstance make_training_instance(const SequenceRecord& seq, int t, const InstanceOptions& opts,
                                        std::uint64_t seed, const model::LoomModel& model,
                                        const Vocabulary& vocab);

/// One instance per frame, in frame order.
std::vector<TrainingInstance> make_training_instances(const SequenceRecord& seq,
                                                      const InstanceOptions& opts, std::uint64_t seed,
                                                      const model::LoomModel& model,
                                                      const Vocabulary& vocab);

/// Independently replaces the text with <uncond> and removes visual context,
/// each with probability p_drop.
TrainingInstance apply_condition_dropout(TrainingInstance instance, double p_drop, std::uint64_t seed);

/// Text-conditioning tokens after dropout.
struct PackedText {
  std::vector<TokenId> prompt;
  std::vector<TokenId> plan;
  std::vector<TokenId> step;
};
PackedText packed_text(const TrainingInstance& instance);

/// Builds the model request for an instance; the target is the noised latent
/// at the instance's tau.
model::PackRequest to_pack_request(const TrainingInstance& instance, const model::LoomModel& model);

}  // namespace loom::trainer
