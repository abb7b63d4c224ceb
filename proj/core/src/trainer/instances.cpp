#include "loom/trainer/instances.hpp"

#include <random>

#include "loom/core/error.hpp"
#include "loom/core/random.hpp"
#include "loom/scheduler/sampling.hpp"
#include "loom/trainer/flow.hpp"

namespace loom::trainer {

namespace {

FrameRecord encode_frame(const Image& image, int step, const model::LoomModel& model) {
  FrameRecord r;
  r.step = step;
  r.image = image;
  r.latent = model.encode_latent(image);
  r.patches = model.image_patches(image);
  return r;
}

model::FrameTokens tokens_of(const FrameRecord& r, const model::LoomModel& model) {
  return model::FrameTokens{r.step, r.patches, model.latent_to_tokens(r.latent)};
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

SequenceRecord encode_sequence(const Sequence& seq, const model::LoomModel& model, const Vocabulary& vocab) {
  validate_plan(seq.plan);
  if (seq.frames.size() != seq.plan.size()) {
    throw StructureError("sequence " + std::to_string(seq.id) + " has " + std::to_string(seq.frames.size()) +
                         " frames for " + std::to_string(seq.plan.size()) + " plan steps");
  }
  SequenceRecord out;
  out.id = seq.id;
  out.prompt = vocab.tokenize(seq.prompt);
  out.plan = truncate_plan(seq.plan, kMaxPlanSteps);
  for (std::size_t i = 0; i < out.plan.size(); ++i) {
    out.frames.push_back(encode_frame(seq.frames[i], static_cast<int>(i) + 1, model));
  }
  if (seq.reference) out.reference = encode_frame(*seq.reference, 0, model);
  return out;
}

TrainingInstance make_training_instance(const SequenceRecord& seq, int t, const InstanceOptions& opts,
                                        std::uint64_t seed, const model::LoomModel& model,
                                        const Vocabulary& vocab) {
  const int n = static_cast<int>(seq.frames.size());
  if (n < 1 || seq.plan.size() != seq.frames.size()) {
    throw StructureError("plan and frame counts differ for sequence " + std::to_string(seq.id));
  }
  if (t < 1 || t > n) throw RangeError("target frame " + std::to_string(t) + " outside the sequence");
  std::mt19937_64 rng(derive_seed(seed, {seq.id, static_cast<std::uint64_t>(t)}));

  TrainingInstance inst;
  inst.sequence_id = seq.id;
  inst.target_frame = t;
  inst.scaffold = vocab.tokenize(kScaffold);
  inst.prompt.push_back(special::kBegin);
  inst.prompt.insert(inst.prompt.end(), inst.scaffold.begin(), inst.scaffold.end());
  inst.prompt.insert(inst.prompt.end(), seq.prompt.begin(), seq.prompt.end());
  inst.plan = vocab.tokenize(render_plan(seq.plan));
  inst.plan.push_back(special::kEnd);
  inst.step = vocab.tokenize(seq.plan.step(static_cast<std::size_t>(t)));

  const int k_max = opts.k_max;
  inst.offset = static_cast<int>(rng() % static_cast<std::uint64_t>(scheduler::offset_range(t - 1, k_max)));
  inst.history = scheduler::sample_history_offset(t - 1, k_max, inst.offset);
  inst.use_reference = seq.reference.has_value() && uniform01(rng) < opts.reference_rate;
  if (inst.use_reference) inst.context.push_back(tokens_of(*seq.reference, model));
  for (int h : inst.history) inst.context.push_back(tokens_of(seq.frames[static_cast<std::size_t>(h - 1)], model));

  inst.target_latent = seq.frames[static_cast<std::size_t>(t - 1)].latent;
  inst.tau = uniform01(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  inst.noise.resize(inst.target_latent.cells.rows(), inst.target_latent.cells.cols());
  for (Eigen::Index i = 0; i < inst.noise.size(); ++i) inst.noise.data()[i] = normal(rng);
  return inst;
}

std::vector<TrainingInstance> make_training_instances(const SequenceRecord& seq, const InstanceOptions& opts,
                                                      std::uint64_t seed, const model::LoomModel& model,
                                                      const Vocabulary& vocab) {
  if (seq.frames.empty() || seq.plan.size() != seq.frames.size()) {
    throw StructureError("plan and frame counts differ for sequence " + std::to_string(seq.id));
  }
  std::vector<TrainingInstance> out;
  for (int t = 1; t <= static_cast<int>(seq.frames.size()); ++t) {
    out.push_back(make_training_instance(seq, t, opts, seed, model, vocab));
  }
  return out;
}

TrainingInstance apply_condition_dropout(TrainingInstance instance, double p_drop, std::uint64_t seed) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw RangeError("p_drop must lie in [0, 1)");
  std::mt19937_64 rng(derive_seed(seed, {instance.sequence_id, static_cast<std::uint64_t>(instance.target_frame),
                                         0xd20bu}));
  instance.drop_text = uniform01(rng) < p_drop;
  instance.drop_history = uniform01(rng) < p_drop;
  return instance;
}

PackedText packed_text(const TrainingInstance& instance) {
  if (instance.drop_text) return {{special::kUnconditional}, {}, {}};
  return {instance.prompt, instance.plan, instance.step};
}

model::PackRequest to_pack_request(const TrainingInstance& instance, const model::LoomModel& model) {
  auto text = packed_text(instance);
  model::PackRequest req;
  req.prompt = std::move(text.prompt);
  req.plan = std::move(text.plan);
  req.step = std::move(text.step);
  if (!instance.drop_history) req.history = instance.context;
  const auto flow = corrupt(instance.target_latent.cells, instance.tau, instance.noise);
  model::Latent noised{instance.target_latent.grid, instance.target_latent.channels, flow.x_tau};
  req.target = model::TargetTokens{instance.target_frame, model.latent_to_tokens(noised), instance.tau};
  return req;
}

}  // namespace loom::trainer
