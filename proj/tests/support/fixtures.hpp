#pragma once

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "loom/core/vocabulary.hpp"
#include "loom/model/config.hpp"
#include "loom/model/transformer.hpp"
#include "loom/toyworld/dataset.hpp"
#include "loom/toyworld/tutorial.hpp"
#include "loom/trainer/instances.hpp"

namespace loom::testkit {

/// Smallest config that still exercises every component.
inline model::ModelConfig micro_config() {
  model::ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.ffn_mult = 2;
  c.ae_hidden = 4;
  c.time_features = 8;
  c.vocab_size = static_cast<int>(Vocabulary::builtin().size());
  return c;
}

inline model::ModelConfig default_config() {
  model::ModelConfig c;
  c.vocab_size = static_cast<int>(Vocabulary::builtin().size());
  return c;
}

inline std::vector<toyworld::Tutorial> tutorials(int n, std::uint64_t seed) {
  std::vector<toyworld::Tutorial> out;
  for (int i = 0; i < n; ++i) out.push_back(toyworld::gen_tutorial(seed * 1000 + static_cast<std::uint64_t>(i)));
  return out;
}

inline std::vector<trainer::Sequence> sequences(int n, std::uint64_t seed) {
  return toyworld::to_sequences(tutorials(n, seed));
}

inline model::Image random_image(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  model::Image img{size, model::Matrix(size * size, 3)};
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) img.pixels.data()[i] = u(rng);
  return img;
}

inline model::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                   double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  model::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("loom_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Byte contents of every regular file under `dir`, keyed by relative path.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[std::filesystem::relative(e.path(), dir).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

}  // namespace loom::testkit
