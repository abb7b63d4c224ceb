// loom: dataset generation, training, generation and evaluation.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "loom/core/error.hpp"
#include "loom/core/vocabulary.hpp"
#include "loom/inference/generate.hpp"
#include "loom/inference/result_io.hpp"
#include "loom/model/checkpoint.hpp"
#include "loom/toyworld/dataset.hpp"
#include "loom/toyworld/evaluate.hpp"
#include "loom/toyworld/png_io.hpp"
#include "loom/trainer/config.hpp"
#include "loom/trainer/trainer.hpp"

namespace fs = std::filesystem;
using namespace loom;

namespace {

trainer::KeyValues load_optional(const std::string& path) {
  return path.empty() ? trainer::KeyValues{} : trainer::KeyValues::load(path);
}

inference::GuidanceConfig guidance_from(const trainer::KeyValues& kv) {
  kv.check_known({"gamma", "s_entity", "ode_steps", "k_max", "decode", "temperature", "plan_retries",
                  "retry_temperature", "use_reference", "max_sequences"});
  inference::GuidanceConfig g;
  g.gamma = kv.get_double("gamma", g.gamma);
  g.s_entity = kv.get_double("s_entity", g.s_entity);
  g.ode_steps = kv.get_int("ode_steps", g.ode_steps);
  g.k_max = kv.get_int("k_max", g.k_max);
  const auto decode = kv.get_string("decode", "greedy");
  if (decode == "greedy") {
    g.decode.kind = inference::DecodeKind::Greedy;
  } else if (decode == "temperature") {
    g.decode.kind = inference::DecodeKind::Temperature;
    g.decode.temperature = kv.get_double("temperature", 1.0);
  } else {
    throw ConfigError("decode must be greedy or temperature");
  }
  g.plan_retries = kv.get_int("plan_retries", g.plan_retries);
  g.retry_temperature = kv.get_double("retry_temperature", g.retry_temperature);
  g.validate();
  return g;
}

int gen_data(const fs::path& out, int count, std::uint64_t seed, const std::string& config) {
  const auto kv = load_optional(config);
  kv.check_known({"count", "composition_ratio", "style_ratio"});
  toyworld::DatasetConfig c;
  c.count = kv.get_int("count", count);
  c.seed = seed;
  c.composition_ratio = kv.get_double("composition_ratio", c.composition_ratio);
  c.style_ratio = kv.get_double("style_ratio", c.style_ratio);
  if (count >= 0) c.count = count;
  toyworld::write_dataset(out, c);
  std::printf("wrote %zu samples to %s\n", toyworld::plan_dataset(c).size(), out.c_str());
  return 0;
}

void check_dataset_vocab(const fs::path& data, const Vocabulary& vocab) {
  if (Vocabulary::load(data / "vocab.txt").hash() != vocab.hash()) {
    throw VocabularyError("dataset vocabulary differs from the built-in vocabulary");
  }
}

int train_cmd(const std::string& config_path, const fs::path& data, const fs::path& out,
              std::optional<std::uint64_t> seed, std::optional<int> steps, const std::string& ablation,
              const std::string& autoencoder) {
  auto kv = trainer::KeyValues::load(config_path);
  if (seed) kv.set("seed", std::to_string(*seed));
  if (steps) kv.set("total_steps", std::to_string(*steps));
  if (!ablation.empty()) kv.set("model.ablation", ablation);
  auto config = trainer::train_config_from(kv);
  const auto& vocab = Vocabulary::builtin();
  check_dataset_vocab(data, vocab);
  config.model.vocab_size = static_cast<int>(vocab.size());
  const auto tutorials = toyworld::load_tutorials(data, toyworld::Split::Train);
  const auto sequences = toyworld::to_sequences(tutorials);
  model::LoomModel m(config.model, config.seed);
  bool pretrain = true;
  if (!autoencoder.empty()) {
    auto donor = model::load_checkpoint(autoencoder, vocab);
    trainer::copy_autoencoder(*donor.model, m);
    pretrain = false;
  }
  const auto log = trainer::train(config, m, vocab, sequences, out, pretrain);
  if (!log.empty()) {
    std::printf("trained %d steps on %zu sequences; final total %.6f (ce %.6f, mse %.6f)\n", log.back().step,
                sequences.size(), log.back().total, log.back().ce, log.back().mse);
  }
  return 0;
}

int generate_cmd(const fs::path& checkpoint, const std::string& prompt, const fs::path& out,
                 const std::string& reference, std::uint64_t seed, const std::string& config) {
  const auto& vocab = Vocabulary::builtin();
  const auto guidance = guidance_from(load_optional(config));
  auto loaded = model::load_checkpoint(checkpoint, vocab);
  std::optional<model::Image> ref;
  if (!reference.empty()) ref = toyworld::read_png(reference);
  const auto result = inference::generate_interleaved(*loaded.model, vocab, prompt, ref, guidance, seed);
  inference::write_result(out, result);
  std::printf("wrote %zu frames to %s\n", result.frames.size(), out.c_str());
  return 0;
}

int evaluate_cmd(const fs::path& checkpoint, const std::vector<std::string>& ablations, const fs::path& data,
                 const fs::path& out, std::uint64_t seed, const std::string& config) {
  const auto& vocab = Vocabulary::builtin();
  auto kv = load_optional(config);
  const bool use_reference = kv.get_bool("use_reference", true);
  const int max_sequences = kv.get_int("max_sequences", 0);
  trainer::KeyValues gkv;
  for (const auto& [k, v] : kv.values()) {
    if (k != "use_reference" && k != "max_sequences") gkv.set(k, v);
  }
  toyworld::EvalOptions opts;
  opts.guidance = guidance_from(gkv);
  opts.use_reference = use_reference;
  opts.seed = seed;

  check_dataset_vocab(data, vocab);
  auto heldout = toyworld::load_tutorials(data, toyworld::Split::Test);
  if (max_sequences > 0 && static_cast<int>(heldout.size()) > max_sequences) heldout.resize(max_sequences);
  fs::create_directories(out);

  auto loaded = model::load_checkpoint(checkpoint, vocab);
  std::vector<inference::InterleavedResult> renders;
  const auto full = toyworld::evaluate(*loaded.model, vocab, heldout, opts, "full", &renders);
  std::vector<toyworld::Metrics> rows{full};
  std::vector<toyworld::Metrics> ablated;
  for (const auto& spec : ablations) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("--ablation expects name=checkpoint");
    auto other = model::load_checkpoint(spec.substr(eq + 1), vocab);
    ablated.push_back(toyworld::evaluate(*other.model, vocab, heldout, opts, spec.substr(0, eq)));
    rows.push_back(ablated.back());
  }
  toyworld::write_metrics_csv(out / "metrics.csv", rows);
  if (!ablated.empty()) toyworld::write_ablation_deltas(out / "ablation_deltas.csv", full, ablated);
  toyworld::write_summary_grid(out / "summary.png", heldout, renders);
  std::printf("plan exact-match %.3f, latent mse %.4f, monotonicity %.3f (noise %.3f), probe %.3f\n",
              full.plan_exact_match, full.latent_mse, full.monotonicity, full.noise_monotonicity,
              full.probe_accuracy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loom: plan-then-render interleaved generation on a toy drawing world"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config;

  auto* gen = app.add_subcommand("gen-data", "Write a procedural dataset directory");
  fs::path gen_out;
  int count = -1;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", count, "Number of tutorial samples (default 100)");
  gen->add_option("--seed", seed, "Dataset seed");
  gen->add_option("--config", config, "Key-value config file")->check(CLI::ExistingFile);

  auto* tr = app.add_subcommand("train", "Train a model on a dataset directory");
  fs::path tr_data, tr_out;
  std::optional<std::uint64_t> tr_seed;
  std::optional<int> tr_steps;
  std::string tr_ablation, tr_ae;
  tr->add_option("--config", config, "Training config file")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", tr_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--seed", tr_seed, "Override the config seed");
  tr->add_option("--steps", tr_steps, "Override total_steps");
  tr->add_option("--ablation", tr_ablation, "full, no-time, no-stepwise, no-reference");
  tr->add_option("--autoencoder", tr_ae, "Reuse the frozen autoencoder of this checkpoint")
      ->check(CLI::ExistingFile);

  auto* ge = app.add_subcommand("generate", "Plan and render an interleaved sequence");
  fs::path ge_ckpt, ge_out;
  std::string ge_prompt, ge_ref;
  ge->add_option("--checkpoint", ge_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  ge->add_option("--prompt", ge_prompt, "Prompt text")->required();
  ge->add_option("--out", ge_out, "Result directory")->required();
  ge->add_option("--reference", ge_ref, "Reference image (PNG)")->check(CLI::ExistingFile);
  ge->add_option("--seed", seed, "Sampling seed");
  ge->add_option("--config", config, "Guidance config file")->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on the held-out split");
  fs::path ev_ckpt, ev_data, ev_out;
  std::vector<std::string> ev_ablations;
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--ablation", ev_ablations, "name=checkpoint of an ablated variant");
  ev->add_option("--data", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", ev_out, "Report directory")->required();
  ev->add_option("--seed", seed, "Evaluation seed");
  ev->add_option("--config", config, "Guidance config file")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "loom: usage error: %s\n", e.what());
    return 2;
  }

  try {
    if (*gen) return gen_data(gen_out, count, seed, config);
    if (*tr) return train_cmd(config, tr_data, tr_out, tr_seed, tr_steps, tr_ablation, tr_ae);
    if (*ge) return generate_cmd(ge_ckpt, ge_prompt, ge_out, ge_ref, seed, config);
    if (*ev) return evaluate_cmd(ev_ckpt, ev_ablations, ev_data, ev_out, seed, config);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "loom: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "loom: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
