#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loom/toyworld/composition.hpp"
#include "loom/toyworld/style.hpp"
#include "loom/toyworld/tutorial.hpp"
#include "loom/trainer/instances.hpp"

namespace loom::toyworld {

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

/// 90/5/5 partition keyed on the sample seed.
Split split_of(std::uint64_t sample_seed);

enum class Family { Tutorial, Composition, Style };
std::string_view to_string(Family f);

struct DatasetConfig {
  int count = 100;  // tutorials; the other families scale with it
  std::uint64_t seed = 0;
  double composition_ratio = 0.25;
  double style_ratio = 0.25;
};

struct DatasetEntry {
  std::string name;  // subdirectory, e.g. tutorial_00012
  Family family = Family::Tutorial;
  Split split = Split::Train;
  std::uint64_t seed = 0;
};

std::uint64_t sample_seed(std::uint64_t dataset_seed, Family family, int index);

/// The full manifest, a pure function of the config.
std::vector<DatasetEntry> plan_dataset(const DatasetConfig& config);

/// Writes vocab.txt, manifest.txt and one subdirectory per entry.
void write_dataset(const std::filesystem::path& dir, const DatasetConfig& config);
std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir);

/// Tutorials of one split, generated in memory.
std::vector<Tutorial> tutorials_for(const DatasetConfig& config, Split split);
/// Tutorials of one split, read back from a dataset directory.
std::vector<Tutorial> load_tutorials(const std::filesystem::path& dir, Split split);

/// The reference image is the finished drawing when `with_reference` is set.
trainer::Sequence to_sequence(const Tutorial& tutorial, std::uint64_t id, bool with_reference = true);
std::vector<trainer::Sequence> to_sequences(const std::vector<Tutorial>& tutorials, bool with_reference = true);

}  // namespace loom::toyworld
