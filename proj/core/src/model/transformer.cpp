#include "loom/model/transformer.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "loom/core/error.hpp"

namespace loom::model {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

std::string layer_name(int layer, const char* suffix) {
  return "blk" + std::to_string(layer) + "." + suffix;
}

}  // namespace

Matrix sinusoidal_features(double tau, int n) {
  Matrix f(1, n);
  const int half = n / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(1000.0) * static_cast<double>(i) / half);
    const double angle = tau * 1000.0 * freq;
    f(0, i) = std::sin(angle);
    f(0, half + i) = std::cos(angle);
  }
  return f;
}

LoomModel::LoomModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  init_parameters(seed);
}

void LoomModel::init_parameters(std::uint64_t seed) {
  const auto& c = config_;
  const double s = c.init_scale;
  const int d = c.d_model;
  const int f = c.ffn_mult * d;
  std::mt19937_64 rng(seed);
  auto w = [&](int in, int out) { return gaussian(in, out, s / std::sqrt(static_cast<double>(in)), rng); };
  const double resid = 1.0 / std::sqrt(2.0 * c.n_layers);

  TinyAutoencoder::register_parameters(params_, c, seed);

  params_.add("text.embed", gaussian(c.vocab_size, d, 0.5 * s, rng), false);
  params_.add("text.pos", gaussian(c.max_text_len, d, 0.1 * s, rng), false);

  const int patch_width = c.patch_size * c.patch_size * 3;
  params_.add("sem.w", w(patch_width, d));
  params_.add("sem.b", Matrix::Zero(1, d), false);
  params_.add("sem.pos", gaussian(c.semantic_tokens(), d, 0.1 * s, rng), false);

  params_.add("lat.w", w(c.latent_token_width(), d));
  params_.add("lat.b", Matrix::Zero(1, d), false);
  params_.add("lat.pos", gaussian(c.latent_tokens(), d, 0.1 * s, rng), false);

  params_.add("type.clean", gaussian(1, d, 0.1 * s, rng), false);
  params_.add("type.noised", gaussian(1, d, 0.1 * s, rng), false);
  params_.add("type.reference", gaussian(1, d, 0.1 * s, rng), false);
  params_.add("temporal", Matrix::Zero(c.t_max, d), false);

  params_.add("time.w1", w(c.time_features, d));
  params_.add("time.b1", Matrix::Zero(1, d), false);
  params_.add("time.w2", w(d, d));
  params_.add("time.b2", Matrix::Zero(1, d), false);

  for (int l = 0; l < c.n_layers; ++l) {
    params_.add(layer_name(l, "ln1.g"), Matrix::Ones(1, d), false);
    params_.add(layer_name(l, "ln1.b"), Matrix::Zero(1, d), false);
    params_.add(layer_name(l, "attn.wq"), w(d, d));
    params_.add(layer_name(l, "attn.wk"), w(d, d));
    params_.add(layer_name(l, "attn.wv"), w(d, d));
    params_.add(layer_name(l, "attn.wo"), w(d, d) * resid);
    params_.add(layer_name(l, "ln2.g"), Matrix::Ones(1, d), false);
    params_.add(layer_name(l, "ln2.b"), Matrix::Zero(1, d), false);
    params_.add(layer_name(l, "ffn.w1"), w(d, f));
    params_.add(layer_name(l, "ffn.b1"), Matrix::Zero(1, f), false);
    params_.add(layer_name(l, "ffn.w2"), w(f, d) * resid);
    params_.add(layer_name(l, "ffn.b2"), Matrix::Zero(1, d), false);
  }
  params_.add("final.ln.g", Matrix::Ones(1, d), false);
  params_.add("final.ln.b", Matrix::Zero(1, d), false);

  params_.add("head.text.w", w(d, c.vocab_size));
  params_.add("head.text.b", Matrix::Zero(1, c.vocab_size), false);
  params_.add("head.time.w", w(c.time_features, d));
  params_.add("head.time.b", Matrix::Zero(1, d), false);
  params_.add("head.vel.w", w(d, c.latent_token_width()));
  params_.add("head.vel.b", Matrix::Zero(1, c.latent_token_width()), false);
}

Var LoomModel::param(Graph& g, const std::string& name) const {
  const auto& p = params_.get(name);
  // Gradients land in the parameter's grad buffer; the model is only mutated
  // by the single training writer.
  return g.grad_enabled() ? g.param(const_cast<Parameter&>(p)) : g.constant(p.value);
}

Matrix LoomModel::image_patches(const Image& image) const {
  if (image.size != config_.image_size || image.pixels.rows() != image.size * image.size ||
      image.pixels.cols() != 3) {
    throw ShapeError("image must be " + std::to_string(config_.image_size) + "x" +
                     std::to_string(config_.image_size) + "x3");
  }
  return patchify(image.pixels, image.size, image.size, config_.patch_size);
}

Matrix LoomModel::encode_semantic(const Image& image) const {
  const Matrix patches = image_patches(image);
  Matrix out = patches * params_.get("sem.w").value;
  out.rowwise() += params_.get("sem.b").value.row(0);
  return out;
}

Matrix LoomModel::add_temporal_embedding(const Matrix& tokens, int t) const {
  if (t < 1 || t > config_.t_max) {
    throw RangeError("temporal index " + std::to_string(t) + " outside [1, " +
                     std::to_string(config_.t_max) + "]");
  }
  if (tokens.cols() != config_.d_model) throw ShapeError("tokens must have d_model columns");
  Matrix out = tokens;
  out.rowwise() += params_.get("temporal").value.row(t - 1);
  return out;
}

Matrix LoomModel::latent_to_tokens(const Latent& latent) const {
  if (latent.grid != config_.latent_grid || latent.channels != config_.latent_channels) {
    throw ShapeError("latent shape does not match the model");
  }
  return patchify(latent.cells, latent.grid, latent.grid, config_.latent_patch);
}

Latent LoomModel::tokens_to_latent(const Matrix& tokens) const {
  const int g = config_.latent_grid;
  return Latent{g, config_.latent_channels, unpatchify(tokens, g, g, config_.latent_patch)};
}

FrameTokens LoomModel::frame_tokens(const Image& image, int frame_index) const {
  return frame_tokens(image, encode_latent(image), frame_index);
}

FrameTokens LoomModel::frame_tokens(const Image& image, const Latent& latent, int frame_index) const {
  return FrameTokens{frame_index, image_patches(image), latent_to_tokens(latent)};
}

Var LoomModel::temporal_row(Graph& g, int t) const {
  if (t < 1 || t > config_.t_max) {
    throw RangeError("temporal index " + std::to_string(t) + " outside [1, " +
                     std::to_string(config_.t_max) + "]");
  }
  const int row = t - 1;
  return gather_rows(param(g, "temporal"), std::span<const int>(&row, 1));
}

Var LoomModel::time_features(Graph& g, double tau) const {
  Var f = g.constant(sinusoidal_features(tau, config_.time_features));
  Var h = gelu(add_row(matmul(f, param(g, "time.w1")), param(g, "time.b1")));
  return add_row(matmul(h, param(g, "time.w2")), param(g, "time.b2"));
}

Var LoomModel::embed_frame(Graph& g, const FrameTokens& frame) const {
  const auto& c = config_;
  if (frame.patches.rows() != c.semantic_tokens() ||
      frame.patches.cols() != c.patch_size * c.patch_size * 3 ||
      frame.latent_tokens.rows() != c.latent_tokens() ||
      frame.latent_tokens.cols() != c.latent_token_width()) {
    throw ShapeError("frame tokens do not match the model");
  }
  Var sem = add_row(matmul(g.constant(frame.patches), param(g, "sem.w")), param(g, "sem.b"));
  sem = add(sem, param(g, "sem.pos"));
  Var lat = add_row(matmul(g.constant(frame.latent_tokens), param(g, "lat.w")), param(g, "lat.b"));
  lat = add(lat, param(g, "lat.pos"));
  const Var parts[] = {sem, lat};
  Var x = concat_rows(parts);
  if (frame.frame_index == 0) {
    x = add_row(x, param(g, "type.reference"));
  } else {
    x = add_row(x, param(g, "type.clean"));
    if (c.ablation.temporal_embedding) x = add_row(x, temporal_row(g, frame.frame_index));
  }
  return x;
}

Var LoomModel::embed_target(Graph& g, const TargetTokens& target) const {
  const auto& c = config_;
  if (target.noised_tokens.rows() != c.latent_tokens() ||
      target.noised_tokens.cols() != c.latent_token_width()) {
    throw ShapeError("noised tokens do not match the model");
  }
  if (target.tau < 0.0 || target.tau > 1.0) throw RangeError("tau must lie in [0, 1]");
  Var x = add_row(matmul(g.constant(target.noised_tokens), param(g, "lat.w")), param(g, "lat.b"));
  x = add(x, param(g, "lat.pos"));
  x = add_row(x, param(g, "type.noised"));
  if (c.ablation.temporal_embedding) x = add_row(x, temporal_row(g, target.frame_index));
  return add_row(x, time_features(g, target.tau));
}

PackedBatch LoomModel::pack(Graph& g, const PackRequest& request) const {
  const auto& c = config_;
  if (request.prompt.empty()) throw LayoutError("prompt span must not be empty");

  std::vector<TokenId> text = request.prompt;
  std::vector<TokenSpan> spans;
  spans.push_back({0, request.prompt.size(), ModalityTag::Text, std::nullopt, SpanRole::Prompt});
  auto add_text = [&](const std::vector<TokenId>& ids) {
    if (ids.empty()) return;
    spans.push_back({text.size(), ids.size(), ModalityTag::Text, std::nullopt, SpanRole::Plan});
    text.insert(text.end(), ids.begin(), ids.end());
  };
  add_text(request.plan);
  if (c.ablation.stepwise_prompt) add_text(request.step);
  if (static_cast<int>(text.size()) > c.max_text_len) {
    throw LayoutError("text length " + std::to_string(text.size()) + " exceeds max_text_len " +
                      std::to_string(c.max_text_len));
  }
  for (TokenId id : text) {
    if (id < 0 || id >= c.vocab_size) throw RangeError("token id outside the model vocabulary");
  }

  std::vector<Var> rows;
  {
    std::vector<int> ids(text.begin(), text.end());
    std::vector<int> pos(text.size());
    std::iota(pos.begin(), pos.end(), 0);
    rows.push_back(add(gather_rows(param(g, "text.embed"), ids), gather_rows(param(g, "text.pos"), pos)));
  }
  std::size_t cursor = text.size();
  if (c.ablation.reference_sampling) {
    for (const auto& frame : request.history) {
      rows.push_back(embed_frame(g, frame));
      const auto len = static_cast<std::size_t>(c.frame_tokens());
      spans.push_back({cursor, len, ModalityTag::CleanVisual, frame.frame_index, SpanRole::HistoryFrame});
      cursor += len;
    }
  }
  std::optional<double> tau;
  if (request.target) {
    rows.push_back(embed_target(g, *request.target));
    const auto len = static_cast<std::size_t>(c.latent_tokens());
    spans.push_back({cursor, len, ModalityTag::NoisedLatent, request.target->frame_index,
                     SpanRole::TargetFrame});
    tau = request.target->tau;
  }
  return pack(g, concat_rows(rows), std::move(spans), tau);
}

PackedBatch LoomModel::pack(Graph& /*g*/, Var embeddings, std::vector<TokenSpan> spans,
                            std::optional<double> tau) const {
  PackedBatch batch;
  batch.embeddings = embeddings;
  batch.mask = scheduler::build_attention_mask(spans);
  for (const auto& s : spans) {
    if (s.tag == ModalityTag::Text) batch.text_length = s.end();
  }
  batch.spans = std::move(spans);
  batch.tau = tau;
  return batch;
}

Var LoomModel::mma_forward(Graph& g, const PackedBatch& batch) const {
  const auto& c = config_;
  const auto n = static_cast<Eigen::Index>(total_length(batch.spans));
  if (batch.embeddings.rows() != n || static_cast<Eigen::Index>(batch.mask.size()) != n) {
    throw LayoutError("embeddings, spans and mask disagree on sequence length");
  }
  if (batch.embeddings.cols() != c.d_model) throw ShapeError("embeddings must have d_model columns");
  const int dh = c.d_model / c.n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Var x = batch.embeddings;
  for (int l = 0; l < c.n_layers; ++l) {
    Var h = layer_norm(x, param(g, layer_name(l, "ln1.g")), param(g, layer_name(l, "ln1.b")));
    Var q = matmul(h, param(g, layer_name(l, "attn.wq")));
    Var k = matmul(h, param(g, layer_name(l, "attn.wk")));
    Var v = matmul(h, param(g, layer_name(l, "attn.wv")));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(c.n_heads));
    for (int hd = 0; hd < c.n_heads; ++hd) {
      Var qh = slice_cols(q, hd * dh, dh);
      Var kh = slice_cols(k, hd * dh, dh);
      Var vh = slice_cols(v, hd * dh, dh);
      Var weights = masked_softmax(scale(matmul_nt(qh, kh), inv_sqrt), batch.mask);
      heads.push_back(matmul(weights, vh));
    }
    Var attn = matmul(c.n_heads == 1 ? heads[0] : concat_cols(heads), param(g, layer_name(l, "attn.wo")));
    x = add(x, attn);
    h = layer_norm(x, param(g, layer_name(l, "ln2.g")), param(g, layer_name(l, "ln2.b")));
    h = gelu(add_row(matmul(h, param(g, layer_name(l, "ffn.w1"))), param(g, layer_name(l, "ffn.b1"))));
    h = add_row(matmul(h, param(g, layer_name(l, "ffn.w2"))), param(g, layer_name(l, "ffn.b2")));
    x = add(x, h);
  }
  return layer_norm(x, param(g, "final.ln.g"), param(g, "final.ln.b"));
}

Var LoomModel::predict_velocity(Graph& g, const PackedBatch& batch, Var hidden) const {
  const TokenSpan* target = nullptr;
  for (const auto& s : batch.spans) {
    if (s.tag == ModalityTag::NoisedLatent) target = &s;
  }
  if (!target || !batch.tau) throw LayoutError("predict_velocity requires a noised target span");
  Var h = slice_rows(hidden, static_cast<Eigen::Index>(target->start),
                     static_cast<Eigen::Index>(target->length));
  Var tf = add_row(matmul(g.constant(sinusoidal_features(*batch.tau, config_.time_features)),
                          param(g, "head.time.w")),
                   param(g, "head.time.b"));
  h = add_row(h, tf);
  return add_row(matmul(h, param(g, "head.vel.w")), param(g, "head.vel.b"));
}

Var LoomModel::predict_text_logits(Graph& g, Var hidden_rows) const {
  return add_row(matmul(hidden_rows, param(g, "head.text.w")), param(g, "head.text.b"));
}

}  // namespace loom::model
