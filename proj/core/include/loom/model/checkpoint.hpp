#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "loom/core/vocabulary.hpp"
#include "loom/model/autograd.hpp"
#include "loom/model/transformer.hpp"

namespace loom::model {

struct NamedArray {
  std::string name;
  Matrix value;
};

/// Contents of a checkpoint archive beyond the model weights.
struct CheckpointExtras {
  std::vector<NamedArray> arrays;              // e.g. optimizer moments
  std::map<std::string, std::string> meta;     // free-form string metadata
};

struct LoadedCheckpoint {
  std::unique_ptr<LoomModel> model;
  CheckpointExtras extras;
};

/// Archive layout:
///   "LOOMCKPT" | u32 version | u64 header bytes | JSON header | f64 LE blob
/// The header records the model config, the vocabulary hash, and for every
/// array its name, shape and element offset into the blob.
void save_checkpoint(const std::filesystem::path& path, const LoomModel& model,
                     const Vocabulary& vocab, const CheckpointExtras& extras = {});

/// Throws CheckpointError when the file is malformed or was written against
/// a different vocabulary.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab);

/// Reads only the header's model config.
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

}  // namespace loom::model
