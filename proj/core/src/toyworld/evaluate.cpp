#include "loom/toyworld/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "loom/core/error.hpp"
#include "loom/core/random.hpp"
#include "loom/toyworld/png_io.hpp"

namespace loom::toyworld {

using model::Matrix;

MonotoneCount monotone_pairs(const std::vector<double>& progress) {
  MonotoneCount c;
  for (std::size_t i = 1; i < progress.size(); ++i) {
    ++c.pairs;
    if (progress[i] >= progress[i - 1]) ++c.non_decreasing;
  }
  return c;
}

std::vector<double> progress_curve(const std::vector<model::Image>& frames, const Tutorial& tutorial) {
  std::vector<double> out;
  for (const auto& f : frames) out.push_back(progress(f, tutorial.final_frame(), tutorial.geometry));
  return out;
}

MonotoneCount noise_monotonicity(const std::vector<Tutorial>& tutorials, std::uint64_t seed) {
  MonotoneCount total;
  for (std::size_t i = 0; i < tutorials.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, {0x401u, i}));
    std::vector<model::Image> frames;
    for (std::size_t t = 0; t < tutorials[i].frames.size(); ++t) {
      model::Image img = model::Image::filled(kCanvasSize, 0, 0, 0);
      for (Eigen::Index k = 0; k < img.pixels.size(); ++k) {
        img.pixels.data()[k] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      }
      frames.push_back(std::move(img));
    }
    const auto c = monotone_pairs(progress_curve(frames, tutorials[i]));
    total.non_decreasing += c.non_decreasing;
    total.pairs += c.pairs;
  }
  return total;
}

namespace {

Matrix probe_features(const model::LoomModel& model, const model::Image& image, int t) {
  model::Graph g(false);
  const std::vector<int> id{special::kUnconditional};
  const std::vector<int> pos{0};
  model::Var text = model::add(model::gather_rows(model.param(g, "text.embed"), id),
                               model::gather_rows(model.param(g, "text.pos"), pos));
  // Embedded directly rather than through pack() so the probe sees the frame
  // even in variants that pack no history.
  const model::Var parts[] = {text, model.embed_frame(g, model.frame_tokens(image, t))};
  const auto len = static_cast<std::size_t>(model.config().frame_tokens());
  std::vector<TokenSpan> spans{{0, 1, ModalityTag::Text, std::nullopt, SpanRole::Prompt},
                               {1, len, ModalityTag::CleanVisual, t, SpanRole::HistoryFrame}};
  auto packed = model.pack(g, model::concat_rows(parts), spans, std::nullopt);
  auto hidden = model.mma_forward(g, packed);
  return hidden.value().middleRows(1, static_cast<Eigen::Index>(len)).colwise().mean();
}

}  // namespace

ProbeResult temporal_probe(const model::LoomModel& model, const std::vector<Tutorial>& tutorials,
                           const EvalOptions& options) {
  if (tutorials.size() < 2) throw Error("temporal probe needs at least two tutorials");
  const int classes = std::min(kMaxTutorialSteps, model.config().t_max);
  const std::size_t half = tutorials.size() / 2;
  std::mt19937_64 rng(derive_seed(options.seed, {0x9b0u}));

  auto sample = [&](std::size_t lo, std::size_t hi, int n, Matrix& x, std::vector<int>& y) {
    x.resize(n, model.config().d_model);
    y.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& tut = tutorials[lo + rng() % (hi - lo)];
      const auto& frame = tut.frames[rng() % tut.frames.size()];
      const int label = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
      x.row(i) = probe_features(model, frame, label + 1);
      y[static_cast<std::size_t>(i)] = label;
    }
  };
  Matrix xtr, xte;
  std::vector<int> ytr, yte;
  sample(0, half, options.probe_samples / 2, xtr, ytr);
  sample(half, tutorials.size(), options.probe_samples - options.probe_samples / 2, xte, yte);

  // Standardize with fitting statistics.
  const Eigen::RowVectorXd mean = xtr.colwise().mean();
  Eigen::RowVectorXd stdv = ((xtr.rowwise() - mean).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < stdv.size(); ++j) stdv(j) = stdv(j) > 1e-12 ? stdv(j) : 1.0;
  auto standardize = [&](const Matrix& x) {
    Matrix z = (x.rowwise() - mean).array().rowwise() / stdv.array();
    return z;
  };
  const Matrix ztr = standardize(xtr);
  const Matrix zte = standardize(xte);

  // Full-batch gradient descent on softmax cross-entropy.
  Matrix w = Matrix::Zero(ztr.cols(), classes);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(classes);
  const double n = static_cast<double>(ztr.rows());
  for (int it = 0; it < options.probe_iterations; ++it) {
    Matrix logits = (ztr * w).rowwise() + b;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double m = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - m).exp();
      logits.row(i) /= logits.row(i).sum();
      logits(i, ytr[static_cast<std::size_t>(i)]) -= 1.0;
    }
    w -= options.probe_learning_rate * ((ztr.transpose() * logits) / n + options.probe_l2 * w);
    b -= options.probe_learning_rate * (logits.colwise().sum() / n);
  }
  auto accuracy = [&](const Matrix& z, const std::vector<int>& y) {
    const Matrix logits = (z * w).rowwise() + b;
    int ok = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Eigen::Index best = 0;
      logits.row(i).maxCoeff(&best);
      if (static_cast<int>(best) == y[static_cast<std::size_t>(i)]) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(logits.rows());
  };
  ProbeResult r;
  r.classes = classes;
  r.chance = 1.0 / classes;
  r.train_accuracy = accuracy(ztr, ytr);
  r.test_accuracy = accuracy(zte, yte);
  return r;
}

Metrics evaluate(const model::LoomModel& model, const Vocabulary& vocab, const std::vector<Tutorial>& heldout,
                 const EvalOptions& options, const std::string& label,
                 std::vector<inference::InterleavedResult>* renders) {
  if (heldout.empty()) throw Error("evaluation set is empty");
  Metrics m;
  m.label = label;
  m.sequences = static_cast<int>(heldout.size());
  int exact = 0, parsed = 0;
  double latent_se = 0.0, pixel_se = 0.0;
  MonotoneCount mono;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const auto& tut = heldout[i];
    const auto seed = derive_seed(options.seed, {0xe7u, i});
    try {
      const auto plan = inference::generate_plan(model, vocab, tut.prompt, std::nullopt, options.guidance, seed);
      ++parsed;
      if (plan == tut.plan) ++exact;
    } catch (const PlanFormatError&) {
    }
    std::optional<model::Image> reference;
    if (options.use_reference) reference = tut.final_frame();
    auto result = inference::render_sequence(model, vocab, tut.prompt, tut.plan, reference, options.guidance, seed);
    for (std::size_t t = 0; t < result.frames.size(); ++t) {
      const auto truth = model.encode_latent(tut.frames[t]);
      latent_se += (result.latents[t].cells - truth.cells).squaredNorm() / static_cast<double>(truth.cells.size());
      pixel_se += model::mean_squared_error(result.frames[t].pixels, tut.frames[t].pixels);
      ++m.frames;
    }
    const auto c = monotone_pairs(progress_curve(result.frames, tut));
    mono.non_decreasing += c.non_decreasing;
    mono.pairs += c.pairs;
    if (renders) renders->push_back(std::move(result));
  }
  m.pairs = mono.pairs;
  m.plan_exact_match = static_cast<double>(exact) / m.sequences;
  m.plan_parse_rate = static_cast<double>(parsed) / m.sequences;
  m.latent_mse = latent_se / m.frames;
  m.pixel_mse = pixel_se / m.frames;
  m.monotonicity = mono.rate();
  m.noise_monotonicity = noise_monotonicity(heldout, options.seed).rate();
  m.probe_accuracy = temporal_probe(model, heldout, options).test_accuracy;
  return m;
}

namespace {

constexpr const char* kMetricsHeader =
    "model,sequences,frames,pairs,plan_exact_match,plan_parse_rate,latent_mse,pixel_mse,monotonicity,"
    "noise_monotonicity,probe_accuracy";

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<Metrics>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kMetricsHeader << "\n";
  char buf[512];
  for (const auto& m : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", m.label.c_str(), m.sequences,
                  m.frames, m.pairs, m.plan_exact_match, m.plan_parse_rate, m.latent_mse, m.pixel_mse,
                  m.monotonicity, m.noise_monotonicity, m.probe_accuracy);
    out << buf;
  }
}

std::vector<Metrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) throw ParseError("unexpected metrics header: " + line);
  std::vector<Metrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<std::string> f;
    for (std::string cell; std::getline(row, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw ParseError("malformed metrics line: " + line);
    Metrics m;
    m.label = f[0];
    m.sequences = std::stoi(f[1]);
    m.frames = std::stoi(f[2]);
    m.pairs = std::stoi(f[3]);
    m.plan_exact_match = std::stod(f[4]);
    m.plan_parse_rate = std::stod(f[5]);
    m.latent_mse = std::stod(f[6]);
    m.pixel_mse = std::stod(f[7]);
    m.monotonicity = std::stod(f[8]);
    m.noise_monotonicity = std::stod(f[9]);
    m.probe_accuracy = std::stod(f[10]);
    out.push_back(m);
  }
  return out;
}

void write_ablation_deltas(const std::filesystem::path& path, const Metrics& full,
                           const std::vector<Metrics>& ablations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ablation,delta_monotonicity,delta_latent_mse,delta_pixel_mse,delta_plan_exact_match,delta_probe_accuracy\n";
  char buf[512];
  for (const auto& a : ablations) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", a.label.c_str(), full.monotonicity - a.monotonicity,
                  full.latent_mse - a.latent_mse, full.pixel_mse - a.pixel_mse,
                  full.plan_exact_match - a.plan_exact_match, full.probe_accuracy - a.probe_accuracy);
    out << buf;
  }
}

void write_summary_grid(const std::filesystem::path& path, const std::vector<Tutorial>& tutorials,
                        const std::vector<inference::InterleavedResult>& renders, int max_sequences) {
  const int n = std::min<int>({max_sequences, static_cast<int>(tutorials.size()), static_cast<int>(renders.size())});
  if (n <= 0) throw Error("summary grid needs at least one rendered sequence");
  constexpr int kScale = 2;
  constexpr int kGap = 2;
  const int cell = kCanvasSize * kScale + kGap;
  const int width = kMaxTutorialSteps * cell + kGap;
  const int height = 2 * n * cell + kGap;
  std::vector<unsigned char> rgb(static_cast<std::size_t>(width) * height * 3, 128);
  auto blit = [&](const model::Image& img, int row, int col) {
    const int x0 = kGap + col * cell;
    const int y0 = kGap + row * cell;
    for (int y = 0; y < kCanvasSize * kScale; ++y) {
      for (int x = 0; x < kCanvasSize * kScale; ++x) {
        for (int c = 0; c < 3; ++c) {
          const double v = std::clamp(img.at(x / kScale, y / kScale, c), 0.0, 1.0);
          rgb[(static_cast<std::size_t>(y0 + y) * width + (x0 + x)) * 3 + c] =
              static_cast<unsigned char>(std::lround(v * 255.0));
        }
      }
    }
  };
  for (int s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < tutorials[s].frames.size() && t < kMaxTutorialSteps; ++t) {
      blit(tutorials[s].frames[t], 2 * s, static_cast<int>(t));
    }
    for (std::size_t t = 0; t < renders[s].frames.size() && t < kMaxTutorialSteps; ++t) {
      blit(renders[s].frames[t], 2 * s + 1, static_cast<int>(t));
    }
  }
  write_rgb_png(path, width, height, rgb);
}

}  // namespace loom::toyworld
