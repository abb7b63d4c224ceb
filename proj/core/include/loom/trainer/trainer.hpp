#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loom/core/vocabulary.hpp"
#include "loom/model/checkpoint.hpp"
#include "loom/model/transformer.hpp"
#include "loom/trainer/config.hpp"
#include "loom/trainer/instances.hpp"

namespace loom::trainer {

/// Adam with decoupled weight decay on parameters flagged `decay`.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay)
      : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  /// Updates every trainable parameter in `params` from its grad.
  void step(const std::vector<model::Parameter*>& params, double lr);
  long long steps() const { return t_; }

  std::vector<model::NamedArray> state() const;
  void load_state(const std::vector<model::NamedArray>& arrays, long long steps);

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long long t_ = 0;
  std::map<std::string, std::pair<model::Matrix, model::Matrix>> moments_;
};

/// Scales all gradients so their global L2 norm is at most max_norm and
/// returns the norm before clipping.
double clip_gradients(const std::vector<model::Parameter*>& params, double max_norm);

struct LossRecord {
  int step = 0;
  double total = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  double lr = 0.0;
};

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& records);
std::vector<LossRecord> read_loss_log(const std::filesystem::path& path);

struct AutoencoderSchedule {
  int steps = 1500;
  double learning_rate = 1e-3;
  int batch_size = 8;
  std::uint64_t seed = 0;
};

/// Fits the autoencoder on `images` with a plain reconstruction loss, sets the
/// latent normalization statistics, and freezes it. Returns the loss trace.
std::vector<double> pretrain_autoencoder(model::LoomModel& model, std::span<const model::Image> images,
                                         const AutoencoderSchedule& schedule);

/// Copies the autoencoder weights and statistics between models of equal
/// config, frozen on the receiving side.
void copy_autoencoder(const model::LoomModel& from, model::LoomModel& to);

/// Every image of every sequence, references included.
std::vector<model::Image> collect_images(const std::vector<Sequence>& dataset);

/// Seeded, epoch-shuffled step loop over the (sequence, frame) pairs of a
/// dataset. The autoencoder must already be frozen.
class Trainer {
 public:
  Trainer(TrainConfig config, model::LoomModel& model, const Vocabulary& vocab);

  void set_dataset(const std::vector<Sequence>& dataset);
  std::size_t instance_count() const { return pairs_.size(); }

  /// Instances of the next batch, in consumption order, without advancing.
  std::vector<TrainingInstance> peek_batch() const;
  LossRecord train_step();
  /// Runs until `total_steps`; `on_record` sees every logged record.
  std::vector<LossRecord> run(const std::function<void(const LossRecord&)>& on_record = {});

  int step() const { return step_; }
  model::CheckpointExtras checkpoint_extras() const;
  void restore(const model::CheckpointExtras& extras);

 private:
  std::vector<TrainingInstance> batch_at(long long cursor) const;
  std::vector<std::pair<std::size_t, int>> epoch_order(long long epoch) const;

  TrainConfig config_;
  model::LoomModel* model_;
  const Vocabulary* vocab_;
  std::vector<SequenceRecord> sequences_;
  std::vector<std::pair<std::size_t, int>> pairs_;
  mutable std::map<long long, std::vector<std::pair<std::size_t, int>>> order_cache_;
  AdamW optimizer_;
  int step_ = 0;
};

/// Pretrains (or reuses) the autoencoder, trains, and writes loss.csv,
/// checkpoint.loom and config.txt into `out_dir`.
std::vector<LossRecord> train(const TrainConfig& config, model::LoomModel& model, const Vocabulary& vocab,
                              const std::vector<Sequence>& dataset, const std::filesystem::path& out_dir,
                              bool pretrain_ae = true);

}  // namespace loom::trainer
