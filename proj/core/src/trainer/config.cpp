#include "loom/trainer/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "loom/core/error.hpp"

namespace loom::trainer {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for " + key + ": '" + v + "'");
  return out;
}

const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys = {
      "model.d_model",      "model.n_heads",     "model.n_layers",     "model.ffn_mult",
      "model.image_size",   "model.latent_grid", "model.latent_channels", "model.latent_patch",
      "model.patch_size",   "model.ae_hidden",   "model.t_max",        "model.max_text_len",
      "model.time_features", "model.init_scale", "model.ablation"};
  return keys;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<double>(key, it->second);
}

int KeyValues::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<int>(key, it->second);
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::uint64_t>(key, it->second);
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + it->second + "'");
}

void KeyValues::check_known(const std::set<std::string>& known) const {
  for (const auto& [k, v] : values_) {
    if (!known.contains(k)) throw ConfigError("unknown config key: " + k);
  }
}

model::ModelConfig model_config_from(const KeyValues& kv, model::ModelConfig m) {
  m.d_model = kv.get_int("model.d_model", m.d_model);
  m.n_heads = kv.get_int("model.n_heads", m.n_heads);
  m.n_layers = kv.get_int("model.n_layers", m.n_layers);
  m.ffn_mult = kv.get_int("model.ffn_mult", m.ffn_mult);
  m.image_size = kv.get_int("model.image_size", m.image_size);
  m.latent_grid = kv.get_int("model.latent_grid", m.latent_grid);
  m.latent_channels = kv.get_int("model.latent_channels", m.latent_channels);
  m.latent_patch = kv.get_int("model.latent_patch", m.latent_patch);
  m.patch_size = kv.get_int("model.patch_size", m.patch_size);
  m.ae_hidden = kv.get_int("model.ae_hidden", m.ae_hidden);
  m.t_max = kv.get_int("model.t_max", m.t_max);
  m.max_text_len = kv.get_int("model.max_text_len", m.max_text_len);
  m.time_features = kv.get_int("model.time_features", m.time_features);
  m.init_scale = kv.get_double("model.init_scale", m.init_scale);
  if (kv.has("model.ablation")) m.ablation = model::Ablation::parse(kv.get_string("model.ablation", "full"));
  return m;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(lambda_ce > 0.0)) throw ConfigError("lambda_ce must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (total_steps < 0) throw ConfigError("total_steps must be non-negative");
  if (k_max < 1) throw ConfigError("k_max must be at least 1");
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw ConfigError("p_drop must lie in [0, 1)");
  if (!(reference_rate >= 0.0 && reference_rate <= 1.0)) throw ConfigError("reference_rate must lie in [0, 1]");
  if (log_every < 1) throw ConfigError("log_every must be at least 1");
  if (ae_steps < 0 || ae_batch_size < 1) throw ConfigError("invalid autoencoder schedule");
}

TrainConfig train_config_from(const KeyValues& kv) {
  std::set<std::string> known = {"learning_rate", "lambda_ce",      "batch_size",  "total_steps",
                                 "k_max",         "p_drop",         "seed",        "beta1",
                                 "beta2",         "adam_eps",       "weight_decay", "grad_clip",
                                 "reference_rate", "log_every",     "checkpoint_every", "ae_steps",
                                 "ae_learning_rate", "ae_batch_size"};
  known.insert(model_keys().begin(), model_keys().end());
  kv.check_known(known);

  TrainConfig c;
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.lambda_ce = kv.get_double("lambda_ce", c.lambda_ce);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.total_steps = kv.get_int("total_steps", c.total_steps);
  c.k_max = kv.get_int("k_max", c.k_max);
  c.p_drop = kv.get_double("p_drop", c.p_drop);
  c.seed = kv.get_u64("seed", c.seed);
  c.beta1 = kv.get_double("beta1", c.beta1);
  c.beta2 = kv.get_double("beta2", c.beta2);
  c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.grad_clip = kv.get_double("grad_clip", c.grad_clip);
  c.reference_rate = kv.get_double("reference_rate", c.reference_rate);
  c.log_every = kv.get_int("log_every", c.log_every);
  c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
  c.ae_steps = kv.get_int("ae_steps", c.ae_steps);
  c.ae_learning_rate = kv.get_double("ae_learning_rate", c.ae_learning_rate);
  c.ae_batch_size = kv.get_int("ae_batch_size", c.ae_batch_size);
  c.model = model_config_from(kv, c.model);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return train_config_from(KeyValues::load(path));
}

std::string to_key_values(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "learning_rate = " << c.learning_rate << "\n"
     << "lambda_ce = " << c.lambda_ce << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "total_steps = " << c.total_steps << "\n"
     << "k_max = " << c.k_max << "\n"
     << "p_drop = " << c.p_drop << "\n"
     << "seed = " << c.seed << "\n"
     << "beta1 = " << c.beta1 << "\n"
     << "beta2 = " << c.beta2 << "\n"
     << "adam_eps = " << c.adam_eps << "\n"
     << "weight_decay = " << c.weight_decay << "\n"
     << "grad_clip = " << c.grad_clip << "\n"
     << "reference_rate = " << c.reference_rate << "\n"
     << "log_every = " << c.log_every << "\n"
     << "checkpoint_every = " << c.checkpoint_every << "\n"
     << "ae_steps = " << c.ae_steps << "\n"
     << "ae_learning_rate = " << c.ae_learning_rate << "\n"
     << "ae_batch_size = " << c.ae_batch_size << "\n"
     << "model.d_model = " << c.model.d_model << "\n"
     << "model.n_heads = " << c.model.n_heads << "\n"
     << "model.n_layers = " << c.model.n_layers << "\n"
     << "model.ffn_mult = " << c.model.ffn_mult << "\n"
     << "model.image_size = " << c.model.image_size << "\n"
     << "model.latent_grid = " << c.model.latent_grid << "\n"
     << "model.latent_channels = " << c.model.latent_channels << "\n"
     << "model.latent_patch = " << c.model.latent_patch << "\n"
     << "model.patch_size = " << c.model.patch_size << "\n"
     << "model.ae_hidden = " << c.model.ae_hidden << "\n"
     << "model.t_max = " << c.model.t_max << "\n"
     << "model.max_text_len = " << c.model.max_text_len << "\n"
     << "model.time_features = " << c.model.time_features << "\n"
     << "model.init_scale = " << c.model.init_scale << "\n"
     << "model.ablation = " << c.model.ablation.name() << "\n";
  return os.str();
}

}  // namespace loom::trainer
