#include "loom/trainer/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "loom/core/error.hpp"
#include "loom/core/random.hpp"
#include "loom/trainer/loss.hpp"

namespace loom::trainer {

using model::Matrix;
using model::Parameter;

void AdamW::step(const std::vector<Parameter*>& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Parameter* p : params) {
    if (!p->trainable || p->grad.size() == 0) continue;
    auto& [m, v] = moments_[p->name];
    if (m.size() == 0) {
      m = Matrix::Zero(p->value.rows(), p->value.cols());
      v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    m = beta1_ * m + (1.0 - beta1_) * p->grad;
    v = beta2_ * v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    if (p->decay && weight_decay_ > 0.0) p->value *= 1.0 - lr * weight_decay_;
    p->value.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
}

std::vector<model::NamedArray> AdamW::state() const {
  std::vector<model::NamedArray> out;
  for (const auto& [name, mv] : moments_) {
    out.push_back({"adam.m/" + name, mv.first});
    out.push_back({"adam.v/" + name, mv.second});
  }
  return out;
}

void AdamW::load_state(const std::vector<model::NamedArray>& arrays, long long steps) {
  moments_.clear();
  for (const auto& a : arrays) {
    if (a.name.rfind("adam.m/", 0) == 0) moments_[a.name.substr(7)].first = a.value;
    if (a.name.rfind("adam.v/", 0) == 0) moments_[a.name.substr(7)].second = a.value;
  }
  t_ = steps;
}

double clip_gradients(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    if (p->grad.size() != 0) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params) {
      if (p->grad.size() != 0) p->grad *= s;
    }
  }
  return norm;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,total,ce,mse,lr\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.step, r.total, r.ce, r.mse, r.lr);
    out << buf;
  }
}

std::vector<LossRecord> read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "step,total,ce,mse,lr") throw ParseError("unexpected loss log header: " + line);
  std::vector<LossRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &r.step, &r.total, &r.ce, &r.mse, &r.lr) != 5) {
      throw ParseError("malformed loss log line: " + line);
    }
    out.push_back(r);
  }
  return out;
}

namespace {

std::vector<Parameter*> autoencoder_params(model::ParameterStore& store) {
  std::vector<Parameter*> out;
  for (Parameter* p : store.all()) {
    if (p->name.rfind("ae.", 0) == 0) out.push_back(p);
  }
  return out;
}

}  // namespace

std::vector<double> pretrain_autoencoder(model::LoomModel& model, std::span<const model::Image> images,
                                         const AutoencoderSchedule& schedule) {
  if (images.empty()) throw Error("autoencoder pretraining needs at least one image");
  auto ae = model.autoencoder();
  ae.set_trainable(true);
  auto params = autoencoder_params(model.parameters());
  AdamW opt(0.9, 0.999, 1e-8, 0.0);
  std::mt19937_64 rng(derive_seed(schedule.seed, {0xae}));
  std::vector<double> trace;
  std::vector<model::Image> batch;
  for (int s = 0; s < schedule.steps; ++s) {
    batch.clear();
    for (int b = 0; b < schedule.batch_size; ++b) batch.push_back(images[rng() % images.size()]);
    model.parameters().zero_grad();
    model::Graph g(true);
    model::Var loss = ae.reconstruction_loss(g, batch);
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) throw TrainingError("non-finite autoencoder loss", s);
    trace.push_back(value);
    g.backward(loss);
    clip_gradients(params, 1.0);
    opt.step(params, schedule.learning_rate);
  }
  model.parameters().zero_grad();
  ae.fit_latent_statistics(images);
  ae.set_trainable(false);
  return trace;
}

void copy_autoencoder(const model::LoomModel& from, model::LoomModel& to) {
  auto& dst = to.parameters();
  for (const Parameter* p : from.parameters().all()) {
    if (p->name.rfind("ae.", 0) != 0) continue;
    auto& q = dst.get(p->name);
    if (q.value.rows() != p->value.rows() || q.value.cols() != p->value.cols()) {
      throw ShapeError("autoencoder shape mismatch for " + p->name);
    }
    q.value = p->value;
  }
  to.autoencoder().set_trainable(false);
}

std::vector<model::Image> collect_images(const std::vector<Sequence>& dataset) {
  std::vector<model::Image> out;
  for (const auto& s : dataset) {
    out.insert(out.end(), s.frames.begin(), s.frames.end());
    if (s.reference) out.push_back(*s.reference);
  }
  return out;
}

Trainer::Trainer(TrainConfig config, model::LoomModel& model, const Vocabulary& vocab)
    : config_(std::move(config)),
      model_(&model),
      vocab_(&vocab),
      optimizer_(config_.beta1, config_.beta2, config_.adam_eps, config_.weight_decay) {
  config_.validate();
}

void Trainer::set_dataset(const std::vector<Sequence>& dataset) {
  if (dataset.empty()) throw Error("training dataset is empty");
  sequences_.clear();
  pairs_.clear();
  order_cache_.clear();
  for (const auto& s : dataset) sequences_.push_back(encode_sequence(s, *model_, *vocab_));
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    for (int t = 1; t <= static_cast<int>(sequences_[i].frames.size()); ++t) pairs_.emplace_back(i, t);
  }
}

std::vector<std::pair<std::size_t, int>> Trainer::epoch_order(long long epoch) const {
  auto it = order_cache_.find(epoch);
  if (it != order_cache_.end()) return it->second;
  auto order = pairs_;
  std::mt19937_64 rng(derive_seed(config_.seed, {static_cast<std::uint64_t>(epoch), 0x5u}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  order_cache_.clear();
  order_cache_[epoch] = order;
  return order;
}

std::vector<TrainingInstance> Trainer::batch_at(long long cursor) const {
  if (pairs_.empty()) throw Error("training dataset is empty");
  const auto n = static_cast<long long>(pairs_.size());
  InstanceOptions opts{config_.k_max, config_.reference_rate};
  std::vector<TrainingInstance> batch;
  for (int b = 0; b < config_.batch_size; ++b) {
    const long long pos = cursor + b;
    const long long epoch = pos / n;
    const auto [si, t] = epoch_order(epoch)[static_cast<std::size_t>(pos % n)];
    const auto epoch_seed = derive_seed(config_.seed, {static_cast<std::uint64_t>(epoch)});
    auto inst = make_training_instance(sequences_[si], t, opts, epoch_seed, *model_, *vocab_);
    batch.push_back(apply_condition_dropout(std::move(inst), config_.p_drop, derive_seed(epoch_seed, {0xd})));
  }
  return batch;
}

std::vector<TrainingInstance> Trainer::peek_batch() const {
  return batch_at(static_cast<long long>(step_) * config_.batch_size);
}

LossRecord Trainer::train_step() {
  const auto batch = peek_batch();
  auto params = model_->parameters().all();
  model_->parameters().zero_grad();
  model::Graph g(true);
  const auto parts = compute_loss(g, *model_, batch, config_.lambda_ce);
  LossRecord r;
  r.step = step_ + 1;
  r.total = parts.total.value()(0, 0);
  r.ce = parts.ce.value()(0, 0);
  r.mse = parts.mse.value()(0, 0);
  r.lr = config_.learning_rate;
  if (!std::isfinite(r.total)) {
    std::ostringstream os;
    os << "non-finite loss at step " << r.step << " (batch " << step_ << ": ";
    for (const auto& inst : batch) os << inst.sequence_id << "/" << inst.target_frame << " ";
    os << ")";
    throw TrainingError(os.str(), step_);
  }
  g.backward(parts.total);
  clip_gradients(params, config_.grad_clip);
  optimizer_.step(params, config_.learning_rate);
  model_->parameters().zero_grad();
  ++step_;
  return r;
}

std::vector<LossRecord> Trainer::run(const std::function<void(const LossRecord&)>& on_record) {
  std::vector<LossRecord> log;
  while (step_ < config_.total_steps) {
    const auto r = train_step();
    if (r.step == 1 || r.step % config_.log_every == 0 || r.step == config_.total_steps) {
      log.push_back(r);
      if (on_record) on_record(r);
    }
  }
  return log;
}

model::CheckpointExtras Trainer::checkpoint_extras() const {
  model::CheckpointExtras extras;
  extras.arrays = optimizer_.state();
  extras.meta["step"] = std::to_string(step_);
  extras.meta["optimizer_steps"] = std::to_string(optimizer_.steps());
  extras.meta["train_config"] = to_key_values(config_);
  return extras;
}

void Trainer::restore(const model::CheckpointExtras& extras) {
  auto get = [&](const char* key) {
    auto it = extras.meta.find(key);
    if (it == extras.meta.end()) throw CheckpointError(std::string("checkpoint lacks ") + key);
    return std::stoll(it->second);
  };
  step_ = static_cast<int>(get("step"));
  optimizer_.load_state(extras.arrays, get("optimizer_steps"));
}

std::vector<LossRecord> train(const TrainConfig& config, model::LoomModel& model, const Vocabulary& vocab,
                              const std::vector<Sequence>& dataset, const std::filesystem::path& out_dir,
                              bool pretrain_ae) {
  if (dataset.empty()) throw Error("training dataset is empty");
  std::filesystem::create_directories(out_dir);
  if (pretrain_ae) {
    const auto images = collect_images(dataset);
    pretrain_autoencoder(model, images,
                         {config.ae_steps, config.ae_learning_rate, config.ae_batch_size, config.seed});
  }
  Trainer trainer(config, model, vocab);
  trainer.set_dataset(dataset);
  std::vector<LossRecord> log;
  while (trainer.step() < config.total_steps) {
    const auto r = trainer.train_step();
    if (r.step == 1 || r.step % config.log_every == 0 || r.step == config.total_steps) log.push_back(r);
    if (config.checkpoint_every > 0 && r.step % config.checkpoint_every == 0 && r.step != config.total_steps) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%06d.loom", r.step);
      model::save_checkpoint(out_dir / name, model, vocab, trainer.checkpoint_extras());
    }
  }
  write_loss_log(out_dir / "loss.csv", log);
  model::save_checkpoint(out_dir / "checkpoint.loom", model, vocab, trainer.checkpoint_extras());
  std::ofstream(out_dir / "config.txt", std::ios::binary) << to_key_values(config);
  return log;
}

}  // namespace loom::trainer
