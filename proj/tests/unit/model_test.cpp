#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/fixtures.hpp"
#include "loom/core/error.hpp"
#include "loom/model/checkpoint.hpp"
#include "loom/model/transformer.hpp"
#include "loom/trainer/loss.hpp"

using namespace loom;
using namespace loom::model;

namespace {

const Vocabulary& vocab() { return Vocabulary::builtin(); }

PackRequest small_request(const LoomModel& m, std::uint64_t seed, bool with_target = true) {
  const auto& c = m.config();
  PackRequest req;
  req.prompt = {special::kBegin, vocab().id("draw"), vocab().id("a")};
  req.plan = vocab().tokenize("Step 1: sketch the circle outline");
  req.step = vocab().tokenize("sketch the circle outline");
  req.history.push_back(m.frame_tokens(testkit::random_image(c.image_size, seed), 0));
  req.history.push_back(m.frame_tokens(testkit::random_image(c.image_size, seed + 1), 1));
  if (with_target) {
    std::mt19937_64 rng(seed);
    req.target = TargetTokens{2, testkit::random_matrix(c.latent_tokens(), c.latent_token_width(), rng), 0.4};
  }
  return req;
}

struct Forward {
  Matrix hidden;
  std::vector<TokenSpan> spans;
};

Forward forward(const LoomModel& m, const PackRequest& req) {
  Graph g(false);
  auto packed = m.pack(g, req);
  return {m.mma_forward(g, packed).value(), packed.spans};
}

}  // namespace

TEST(Model, SemanticEncoderShapeAndBias) {
  LoomModel m(testkit::default_config(), 1);
  m.parameters().get("sem.b").value.setConstant(0.25);
  const Matrix tokens = m.encode_semantic(Image::filled(32, 0, 0, 0));
  EXPECT_EQ(tokens.rows(), 16);
  EXPECT_EQ(tokens.cols(), m.config().d_model);
  for (Eigen::Index r = 0; r < tokens.rows(); ++r) EXPECT_EQ(tokens.row(r), m.parameters().get("sem.b").value.row(0));
}

TEST(Model, SemanticTokensPermuteUnderPatchTranslation) {
  LoomModel m(testkit::default_config(), 2);
  Image a = Image::filled(32, 0, 0, 0);
  Image b = a;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = u(rng);
        a.at(x, y, c) = v;
        b.at(x + 8, y, c) = v;
      }
    }
  }
  const Matrix ta = m.encode_semantic(a);
  const Matrix tb = m.encode_semantic(b);
  EXPECT_EQ(ta.row(0), tb.row(1));
  EXPECT_EQ(ta.row(1), tb.row(0));
  for (int r = 2; r < 16; ++r) EXPECT_EQ(ta.row(r), tb.row(r));
}

TEST(Model, TemporalEmbeddingIsAdditive) {
  LoomModel m(testkit::default_config(), 3);
  std::mt19937_64 rng(4);
  const Matrix tokens = testkit::random_matrix(5, m.config().d_model, rng);
  EXPECT_EQ(m.add_temporal_embedding(tokens, 3), tokens);  // zero at initialization
  m.parameters().get("temporal").value = testkit::random_matrix(m.config().t_max, m.config().d_model, rng);
  const auto& e = m.parameters().get("temporal").value;
  const Matrix diff = m.add_temporal_embedding(tokens, 5) - m.add_temporal_embedding(tokens, 3);
  for (Eigen::Index r = 0; r < diff.rows(); ++r) {
    EXPECT_LT((diff.row(r) - (e.row(4) - e.row(2))).cwiseAbs().maxCoeff(), 1e-14);
  }
  EXPECT_THROW(m.add_temporal_embedding(tokens, m.config().t_max + 1), RangeError);
  EXPECT_THROW(m.add_temporal_embedding(tokens, 0), RangeError);
}

TEST(Model, AutoencoderIsPureAndFinite) {
  LoomModel m(testkit::default_config(), 4);
  const Image zero = Image::filled(32, 0, 0, 0);
  const Latent a = m.encode_latent(zero);
  EXPECT_EQ(a.grid, 8);
  EXPECT_EQ(a.channels, 4);
  EXPECT_TRUE(a.cells.allFinite());
  EXPECT_EQ(m.encode_latent(zero), a);
  const Image img = testkit::random_image(32, 5);
  EXPECT_EQ(m.encode_latent(img), m.encode_latent(Image(img)));
  const Image dec = m.decode_latent(a);
  EXPECT_EQ(dec.size, 32);
  EXPECT_TRUE(dec.pixels.allFinite());
  EXPECT_EQ(m.decode_latent(a), dec);
  EXPECT_THROW(m.encode_latent(Image::filled(16, 0, 0, 0)), ShapeError);
  EXPECT_THROW(m.decode_latent(Latent{4, 4, Matrix::Zero(16, 4)}), ShapeError);
}

TEST(Model, SinglePositionAttentionIsPerRow) {
  // With self-only attention every row is processed independently.
  LoomModel m(testkit::micro_config(), 5);
  std::mt19937_64 rng(6);
  const Matrix x = testkit::random_matrix(2, m.config().d_model, rng);
  auto run = [&](const Matrix& emb, scheduler::AttentionMask mask) {
    Graph g(false);
    PackedBatch b;
    b.embeddings = g.constant(emb);
    b.spans = {{0, static_cast<std::size_t>(emb.rows()), ModalityTag::Text, std::nullopt, SpanRole::Prompt}};
    b.mask = std::move(mask);
    return m.mma_forward(g, b).value();
  };
  scheduler::AttentionMask diag(2);
  diag.set(0, 0, true);
  diag.set(1, 1, true);
  scheduler::AttentionMask one(1);
  one.set(0, 0, true);
  const Matrix both = run(x, diag);
  for (int r = 0; r < 2; ++r) {
    const Matrix alone = run(x.row(r), one);
    EXPECT_LT((both.row(r) - alone.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Model, MaskSpanMismatchIsLayoutError) {
  LoomModel m(testkit::micro_config(), 5);
  Graph g(false);
  PackedBatch b;
  b.embeddings = g.constant(Matrix::Zero(3, m.config().d_model));
  b.spans = {{0, 2, ModalityTag::Text, std::nullopt, SpanRole::Prompt}};
  b.mask = scheduler::AttentionMask(2);
  EXPECT_THROW(m.mma_forward(g, b), LayoutError);
}

TEST(Model, NoiseIsolationIsBitwise) {
  LoomModel m(testkit::micro_config(), 7);
  m.parameters().get("temporal").value.setRandom();
  auto req = small_request(m, 8);
  const auto a = forward(m, req);
  req.target->noised_tokens.setRandom();
  req.target->tau = 0.9;
  const auto b = forward(m, req);
  std::size_t checked = 0;
  for (const auto& s : a.spans) {
    if (s.tag == ModalityTag::NoisedLatent) {
      EXPECT_NE(a.hidden.middleRows(s.start, s.length), b.hidden.middleRows(s.start, s.length));
      continue;
    }
    for (auto p = s.start; p < s.end(); ++p, ++checked) {
      EXPECT_EQ(a.hidden.row(p), b.hidden.row(p)) << "position " << p;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(Model, VelocityHead) {
  LoomModel m(testkit::micro_config(), 9);
  const auto req = small_request(m, 10);
  Graph g(false);
  auto packed = m.pack(g, req);
  Var hidden = m.mma_forward(g, packed);
  const Matrix v = m.predict_velocity(g, packed, hidden).value();
  const Latent lat = m.tokens_to_latent(v);
  EXPECT_EQ(lat.grid, m.config().latent_grid);
  EXPECT_EQ(lat.channels, m.config().latent_channels);
  Graph g2(false);
  auto packed2 = m.pack(g2, req);
  EXPECT_EQ(m.predict_velocity(g2, packed2, m.mma_forward(g2, packed2)).value(), v);

  Graph g3(false);
  auto text_only = m.pack(g3, small_request(m, 10, false));
  EXPECT_THROW(m.predict_velocity(g3, text_only, m.mma_forward(g3, text_only)), LayoutError);
}

TEST(Model, VelocityHeadGradientMatchesFiniteDifferences) {
  LoomModel m(testkit::micro_config(), 11);
  const auto req = small_request(m, 12);
  std::mt19937_64 rng(13);
  const Matrix target = testkit::random_matrix(m.config().latent_tokens(), m.config().latent_token_width(), rng);
  auto loss = [&](bool backward) {
    Graph g(backward);
    auto packed = m.pack(g, req);
    Var se = squared_error_sum(m.predict_velocity(g, packed, m.mma_forward(g, packed)), target);
    if (backward) g.backward(se);
    return se.value()(0, 0);
  };
  m.parameters().zero_grad();
  loss(true);
  auto& w = m.parameters().get("head.vel.w");
  const Matrix analytic = w.grad;
  Matrix numeric(w.value.rows(), w.value.cols());
  for (Eigen::Index i = 0; i < w.value.size(); ++i) {
    const double orig = w.value.data()[i];
    w.value.data()[i] = orig + 1e-6;
    const double up = loss(false);
    w.value.data()[i] = orig - 1e-6;
    const double down = loss(false);
    w.value.data()[i] = orig;
    numeric.data()[i] = (up - down) / 2e-6;
  }
  EXPECT_LT((analytic - numeric).norm() / numeric.norm(), 1e-4);
}

TEST(Model, TextHead) {
  LoomModel m(testkit::micro_config(), 14);
  Graph g(false);
  auto packed = m.pack(g, small_request(m, 15));
  Var hidden = m.mma_forward(g, packed);
  const auto n = static_cast<Eigen::Index>(packed.text_length);
  Var logits = m.predict_text_logits(g, slice_rows(hidden, 0, n));
  EXPECT_EQ(logits.rows(), n);
  EXPECT_EQ(logits.cols(), static_cast<Eigen::Index>(vocab().size()));
  const Matrix p = row_softmax(logits).value();
  for (Eigen::Index r = 0; r < n; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);

  const std::vector<int> targets{1, 7, 20};
  const double ce = cross_entropy_sum(g.constant(Matrix::Zero(3, static_cast<Eigen::Index>(vocab().size()))),
                                      targets)
                        .value()(0, 0);
  EXPECT_NEAR(ce / 3.0, std::log(static_cast<double>(vocab().size())), 1e-6);
}

TEST(Model, ForwardIsDeterministic) {
  LoomModel a(testkit::micro_config(), 16);
  LoomModel b(testkit::micro_config(), 16);
  EXPECT_EQ(forward(a, small_request(a, 17)).hidden, forward(b, small_request(b, 17)).hidden);
}

TEST(Model, AblationsChangePacking) {
  auto cfg = testkit::micro_config();
  LoomModel full(cfg, 18);
  cfg.ablation = Ablation::parse("no-stepwise");
  LoomModel no_step(cfg, 18);
  cfg.ablation = Ablation::parse("no-reference");
  LoomModel no_ref(cfg, 18);
  Graph g(false);
  const auto req = small_request(full, 19);
  const auto pf = full.pack(g, req);
  const auto ps = no_step.pack(g, req);
  const auto pr = no_ref.pack(g, req);
  EXPECT_EQ(pf.text_length, ps.text_length + req.step.size());
  EXPECT_EQ(total_length(pf.spans), total_length(pr.spans) + 2 * static_cast<std::size_t>(cfg.frame_tokens()));
  for (const auto& s : pr.spans) EXPECT_NE(s.tag, ModalityTag::CleanVisual);

  cfg.ablation = Ablation::parse("no-time");
  LoomModel no_time(cfg, 18);
  no_time.parameters().get("temporal").value.setConstant(5.0);
  LoomModel no_time_zero(cfg, 18);
  EXPECT_EQ(forward(no_time, req).hidden, forward(no_time_zero, req).hidden);
}

TEST(Model, AblationNames) {
  for (const char* name : {"full", "no-time", "no-stepwise", "no-reference"}) {
    EXPECT_EQ(Ablation::parse(name).name(), name);
  }
  EXPECT_FALSE(Ablation::parse("no-time").temporal_embedding);
  EXPECT_FALSE(Ablation::parse("no-stepwise").stepwise_prompt);
  EXPECT_FALSE(Ablation::parse("no-reference").reference_sampling);
  EXPECT_THROW(Ablation::parse("no-everything"), ConfigError);
}

TEST(Model, ConfigValidation) {
  auto c = testkit::micro_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = testkit::micro_config();
  c.latent_grid = 4;
  EXPECT_THROW(LoomModel(c, 0), ConfigError);
}

TEST(Model, FullGradientCheck) {
  LoomModel m(testkit::micro_config(), 20);
  m.autoencoder().set_trainable(false);
  std::mt19937_64 rng(21);
  for (auto* p : m.parameters().all()) {
    if (p->name == "temporal" || p->name.starts_with("type.")) p->value = testkit::random_matrix(p->value.rows(), p->value.cols(), rng, 0.3);
  }
  const auto seqs = testkit::sequences(1, 22);
  const auto rec = trainer::encode_sequence(seqs[0], m, vocab());
  trainer::InstanceOptions opts;
  opts.reference_rate = 1.0;
  auto instances = trainer::make_training_instances(rec, opts, 23, m, vocab());
  std::vector<trainer::TrainingInstance> batch{instances.front(), instances.back()};
  ASSERT_FALSE(batch.back().history.empty());

  auto loss = [&](bool backward) {
    Graph g(backward);
    auto parts = trainer::compute_loss(g, m, batch, 0.25);
    if (backward) g.backward(parts.total);
    return parts.total.value()(0, 0);
  };
  m.parameters().zero_grad();
  for (auto* p : m.parameters().all()) p->grad = Matrix::Zero(p->value.rows(), p->value.cols());
  loss(true);

  std::size_t tensors = 0;
  for (auto* p : m.parameters().all()) {
    if (!p->trainable || p->name.starts_with("ae.")) continue;
    // Every element for small tensors, an evenly strided sample for large ones.
    const Eigen::Index n = p->value.size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / 48);
    double diff2 = 0, a2 = 0, n2 = 0;
    for (Eigen::Index i = 0; i < n; i += stride) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + 1e-5;
      const double up = loss(false);
      p->value.data()[i] = orig - 1e-5;
      const double down = loss(false);
      p->value.data()[i] = orig;
      const double numeric = (up - down) / 2e-5;
      const double analytic = p->grad.data()[i];
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    if (denom < 1e-10) continue;
    EXPECT_LE(std::sqrt(diff2) / denom, 1e-3) << p->name;
    ++tensors;
  }
  EXPECT_GT(tensors, 20u);
}

TEST(Checkpoint, RoundTrip) {
  testkit::TempDir dir("ckpt");
  LoomModel m(testkit::micro_config(), 24);
  m.parameters().get("temporal").value.setRandom();
  CheckpointExtras extras;
  extras.meta["step"] = "17";
  extras.arrays.push_back({"adam.m/x", Matrix::Constant(2, 3, 1.5)});
  const auto path = dir.path() / "m.loom";
  save_checkpoint(path, m, vocab(), extras);
  const auto loaded = load_checkpoint(path, vocab());
  EXPECT_EQ(loaded.model->config(), m.config());
  EXPECT_EQ(read_checkpoint_config(path), m.config());
  for (const auto* p : m.parameters().all()) {
    const auto& q = loaded.model->parameters().get(p->name);
    EXPECT_EQ(q.value, p->value) << p->name;
    EXPECT_EQ(q.decay, p->decay);
  }
  EXPECT_EQ(loaded.extras.meta.at("step"), "17");
  ASSERT_EQ(loaded.extras.arrays.size(), 1u);
  EXPECT_EQ(loaded.extras.arrays[0].value, extras.arrays[0].value);
  const auto req = small_request(m, 25);
  EXPECT_EQ(forward(*loaded.model, req).hidden, forward(m, req).hidden);
}

TEST(Checkpoint, RejectsForeignVocabularyAndGarbage) {
  testkit::TempDir dir("ckpt_bad");
  LoomModel m(testkit::micro_config(), 26);
  const auto path = dir.path() / "m.loom";
  save_checkpoint(path, m, vocab());
  auto words = builtin_words();
  words.push_back("zebra");
  const Vocabulary other(EntityVocabulary::builtin(), words);
  EXPECT_THROW(load_checkpoint(path, other), CheckpointError);
  {
    std::ofstream out(dir.path() / "junk.loom", std::ios::binary);
    out << "definitely not a checkpoint";
  }
  EXPECT_THROW(load_checkpoint(dir.path() / "junk.loom", vocab()), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir.path() / "missing.loom", vocab()), CheckpointError);
}
