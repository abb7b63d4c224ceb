#include "loom/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "loom/core/error.hpp"

namespace loom::model {

namespace {

constexpr char kMagic[8] = {'L', 'O', 'O', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return json{{"d_model", c.d_model},
              {"n_heads", c.n_heads},
              {"n_layers", c.n_layers},
              {"ffn_mult", c.ffn_mult},
              {"image_size", c.image_size},
              {"latent_grid", c.latent_grid},
              {"latent_channels", c.latent_channels},
              {"latent_patch", c.latent_patch},
              {"patch_size", c.patch_size},
              {"ae_hidden", c.ae_hidden},
              {"vocab_size", c.vocab_size},
              {"t_max", c.t_max},
              {"max_text_len", c.max_text_len},
              {"time_features", c.time_features},
              {"init_scale", c.init_scale},
              {"ablation", c.ablation.name()}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model");
  c.n_heads = j.at("n_heads");
  c.n_layers = j.at("n_layers");
  c.ffn_mult = j.at("ffn_mult");
  c.image_size = j.at("image_size");
  c.latent_grid = j.at("latent_grid");
  c.latent_channels = j.at("latent_channels");
  c.latent_patch = j.at("latent_patch");
  c.patch_size = j.at("patch_size");
  c.ae_hidden = j.at("ae_hidden");
  c.vocab_size = j.at("vocab_size");
  c.t_max = j.at("t_max");
  c.max_text_len = j.at("max_text_len");
  c.time_features = j.at("time_features");
  c.init_scale = j.at("init_scale");
  c.ablation = Ablation::parse(j.at("ablation").get<std::string>());
  return c;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

struct RawArchive {
  json header;
  std::vector<double> blob;
};

RawArchive read_archive(const std::filesystem::path& path, bool with_blob) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("not a loom checkpoint: " + path.string());
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw CheckpointError("truncated checkpoint header");
  RawArchive raw;
  try {
    raw.header = json::parse(header);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  if (with_blob) {
    const std::uint64_t count = raw.header.at("blob_elements");
    raw.blob.resize(count);
    in.read(reinterpret_cast<char*>(raw.blob.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw CheckpointError("truncated checkpoint data");
  }
  return raw;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const LoomModel& model,
                     const Vocabulary& vocab, const CheckpointExtras& extras) {
  json arrays = json::array();
  std::vector<const Matrix*> blobs;
  std::uint64_t offset = 0;
  auto add = [&](const std::string& name, const Matrix& m) {
    arrays.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    blobs.push_back(&m);
    offset += static_cast<std::uint64_t>(m.size());
  };
  for (const auto* p : model.parameters().all()) add(p->name, p->value);
  for (const auto& a : extras.arrays) add(a.name, a.value);

  json header{{"format", "loom-checkpoint"},
              {"model_config", config_to_json(model.config())},
              {"vocab_hash", hex64(vocab.hash())},
              {"vocab_size", vocab.size()},
              {"arrays", arrays},
              {"model_arrays", model.parameters().size()},
              {"blob_elements", offset},
              {"meta", extras.meta}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
  const std::uint64_t header_len = text.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* m : blobs) {
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab) {
  RawArchive raw = read_archive(path, true);
  const auto& h = raw.header;
  try {
    if (h.at("vocab_hash").get<std::string>() != hex64(vocab.hash())) {
      throw CheckpointError("checkpoint vocabulary hash " + h.at("vocab_hash").get<std::string>() +
                            " does not match vocabulary " + hex64(vocab.hash()));
    }
    LoadedCheckpoint out;
    out.model = std::make_unique<LoomModel>(config_from_json(h.at("model_config")), 0);
    auto& params = out.model->parameters();
    const std::size_t model_arrays = h.at("model_arrays");
    const auto& arrays = h.at("arrays");
    if (arrays.size() < model_arrays || params.size() != model_arrays) {
      throw CheckpointError("checkpoint parameter count does not match its config");
    }
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      const auto& a = arrays[i];
      const std::string name = a.at("name");
      const Eigen::Index rows = a.at("rows");
      const Eigen::Index cols = a.at("cols");
      const std::uint64_t offset = a.at("offset");
      if (offset + static_cast<std::uint64_t>(rows * cols) > raw.blob.size()) {
        throw CheckpointError("array " + name + " overruns the data blob");
      }
      Matrix m = Eigen::Map<const Matrix>(raw.blob.data() + offset, rows, cols);
      if (i < model_arrays) {
        auto& p = params.get(name);
        if (p.value.rows() != rows || p.value.cols() != cols) {
          throw CheckpointError("shape mismatch for parameter " + name);
        }
        p.value = std::move(m);
      } else {
        out.extras.arrays.push_back({name, std::move(m)});
      }
    }
    out.extras.meta = h.at("meta").get<std::map<std::string, std::string>>();
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  return config_from_json(read_archive(path, false).header.at("model_config"));
}

}  // namespace loom::model
