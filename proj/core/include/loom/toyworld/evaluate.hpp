#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loom/inference/generate.hpp"
#include "loom/model/transformer.hpp"
#include "loom/toyworld/tutorial.hpp"

namespace loom::toyworld {

struct EvalOptions {
  inference::GuidanceConfig guidance;
  bool use_reference = true;
  std::uint64_t seed = 0;
  int probe_samples = 720;  // split evenly between fitting and scoring by tutorial
  int probe_iterations = 500;
  double probe_learning_rate = 0.5;
  double probe_l2 = 1e-4;
};

struct Metrics {
  std::string label;
  int sequences = 0;
  int frames = 0;
  int pairs = 0;
  double plan_exact_match = 0.0;
  double plan_parse_rate = 0.0;
  double latent_mse = 0.0;
  double pixel_mse = 0.0;
  double monotonicity = 0.0;
  double noise_monotonicity = 0.0;
  double probe_accuracy = 0.0;
};

struct MonotoneCount {
  int non_decreasing = 0;
  int pairs = 0;
  double rate() const { return pairs == 0 ? 1.0 : static_cast<double>(non_decreasing) / pairs; }
};

/// Counts adjacent pairs with progress[t+1] >= progress[t].
MonotoneCount monotone_pairs(const std::vector<double>& progress);

/// Progress of each frame against the tutorial's finished drawing.
std::vector<double> progress_curve(const std::vector<model::Image>& frames, const Tutorial& tutorial);

/// Monotonicity when every frame is replaced by uniform noise.
MonotoneCount noise_monotonicity(const std::vector<Tutorial>& tutorials, std::uint64_t seed);

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double chance = 0.0;
  int classes = 0;
};

/// Stamps frames of held-out tutorials with step labels drawn independently
/// of their content, mean-pools the model's hidden states over each frame
/// span, and fits a softmax linear probe on half the tutorials. Scored on the
/// other half.
ProbeResult temporal_probe(const model::LoomModel& model, const std::vector<Tutorial>& tutorials,
                           const EvalOptions& options);

/// Plan exact match, per-frame latent and pixel MSE, progress monotonicity,
/// the noise baseline, and the temporal probe over held-out tutorials. Frames
/// are rendered against the canonical plan so frame metrics do not depend on
/// plan decoding. `renders` receives the rendered sequences when non-null.
Metrics evaluate(const model::LoomModel& model, const Vocabulary& vocab, const std::vector<Tutorial>& heldout,
                 const EvalOptions& options, const std::string& label,
                 std::vector<inference::InterleavedResult>* renders = nullptr);

/// Header: model,sequences,frames,pairs,plan_exact_match,plan_parse_rate,
/// latent_mse,pixel_mse,monotonicity,noise_monotonicity,probe_accuracy
void write_metrics_csv(const std::filesystem::path& path, const std::vector<Metrics>& rows);
std::vector<Metrics> read_metrics_csv(const std::filesystem::path& path);

/// Header: ablation,delta_monotonicity,delta_latent_mse,delta_pixel_mse,
/// delta_plan_exact_match,delta_probe_accuracy (full minus ablated).
void write_ablation_deltas(const std::filesystem::path& path, const Metrics& full,
                           const std::vector<Metrics>& ablations);

/// Ground-truth and rendered frames, two rows per sequence, 2x upscaled.
void write_summary_grid(const std::filesystem::path& path, const std::vector<Tutorial>& tutorials,
                        const std::vector<inference::InterleavedResult>& renders, int max_sequences = 4);

}  // namespace loom::toyworld
