#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "loom/model/config.hpp"

namespace loom::trainer {

/// Flat "key = value" file; '#' starts a comment. Later keys override.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws ConfigError naming any key not in `known`.
  void check_known(const std::set<std::string>& known) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct TrainConfig {
  double learning_rate = 2.5e-5;
  double lambda_ce = 0.25;
  int batch_size = 4;
  int total_steps = 2000;
  int k_max = 2;
  double p_drop = 0.1;
  std::uint64_t seed = 0;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 1.0;  // global norm; 0 disables
  double reference_rate = 0.5;
  int log_every = 10;
  int checkpoint_every = 0;  // 0: only the final checkpoint

  int ae_steps = 1500;
  double ae_learning_rate = 1e-3;
  int ae_batch_size = 8;

  model::ModelConfig model;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

TrainConfig train_config_from(const KeyValues& kv);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string to_key_values(const TrainConfig& config);

/// Reads the "model." keys of `kv` over the defaults.
model::ModelConfig model_config_from(const KeyValues& kv, model::ModelConfig base = {});

}  // namespace loom::trainer
