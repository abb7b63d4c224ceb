#include <gtest/gtest.h>

#include <random>

#include "../support/fixtures.hpp"
#include "loom/core/error.hpp"
#include "loom/core/random.hpp"
#include "loom/inference/generate.hpp"
#include "loom/inference/guidance.hpp"
#include "loom/inference/result_io.hpp"
#include "loom/scheduler/sampling.hpp"
#include "loom/toyworld/canvas.hpp"

using namespace loom;
using namespace loom::inference;
using model::Matrix;

namespace {

const Vocabulary& vocab() { return Vocabulary::builtin(); }

const std::string kPrompt = "draw a red circle in four steps";

Plan four_steps() { return toyworld::canonical_plan(toyworld::Subject::Circle, toyworld::Color::Red, 4); }

GuidanceConfig fast(int ode_steps = 3) {
  GuidanceConfig g;
  g.ode_steps = ode_steps;
  return g;
}

model::LoomModel& micro_model() {
  static model::LoomModel m = [] {
    model::LoomModel mm(testkit::micro_config(), 61);
    mm.autoencoder().set_trainable(false);
    return mm;
  }();
  return m;
}

Matrix cells(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST(Guidance, CfgIdentities) {
  std::mt19937_64 rng(1);
  const Matrix c = testkit::random_matrix(16, 4, rng);
  const Matrix u = testkit::random_matrix(16, 4, rng);
  EXPECT_EQ(cfg_combine(c, u, 1.0), c);
  EXPECT_EQ(cfg_combine(c, u, 0.0), u);
  for (double g : {0.0, 0.5, 1.0, 3.0, 7.5}) EXPECT_EQ(cfg_combine(c, c, g), c);
  EXPECT_EQ(cfg_combine(cells({2.0}), cells({1.0}), 3.0)(0, 0), 4.0);
  EXPECT_THROW(cfg_combine(c, Matrix::Zero(16, 3), 2.0), ShapeError);
}

TEST(Guidance, LocalizedIdentities) {
  std::mt19937_64 rng(2);
  const Matrix c = testkit::random_matrix(16, 4, rng);
  const Matrix u = testkit::random_matrix(16, 4, rng);
  model::RegionMask all{4, std::vector<bool>(16, true)};
  model::RegionMask none{4, std::vector<bool>(16, false)};
  EXPECT_EQ(localized_cfg(c, u, 2.0, 5.0, all), cfg_combine(c, u, 5.0));
  EXPECT_EQ(localized_cfg(c, u, 2.0, 5.0, none), cfg_combine(c, u, 2.0));

  model::RegionMask half{2, {false, true, false, true}};
  const Matrix cond = cells({2.0, 2.0, -1.0, 0.5});
  const Matrix unc = cells({1.0, 1.0, 3.0, 0.25});
  const Matrix out = localized_cfg(cond, unc, 1.0, 3.0, half);
  EXPECT_EQ(out(0, 0), 2.0);
  EXPECT_EQ(out(1, 0), 3 * 2.0 - 2 * 1.0);
  EXPECT_EQ(out(2, 0), -1.0);
  EXPECT_EQ(out(3, 0), 3 * 0.5 - 2 * 0.25);
  EXPECT_THROW(localized_cfg(c, u, 1.0, 3.0, half), ShapeError);
}

TEST(Guidance, Validation) {
  auto g = fast();
  g.ode_steps = 0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = fast();
  g.gamma = -1;
  EXPECT_THROW(g.validate(), ConfigError);
  g = fast();
  g.decode = {DecodeKind::Temperature, 0.0};
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(Render, SingleEulerStepOracle) {
  const auto& m = micro_model();
  const auto& c = m.config();
  RenderRequest req{kPrompt, four_steps(), 1, {}, std::nullopt, std::nullopt};
  const std::uint64_t seed = 77;
  const auto frame = render_frame(m, vocab(), req, fast(1), seed);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = c.latent_grid * c.latent_grid;
  model::Latent eps{c.latent_grid, c.latent_channels, Matrix(n, c.latent_channels)};
  for (Eigen::Index i = 0; i < eps.cells.size(); ++i) eps.cells.data()[i] = normal(rng);
  model::Graph g(false);
  auto packed = m.pack(g, conditional_request(m, vocab(), req, m.latent_to_tokens(eps), 1.0));
  const Matrix v = m.predict_velocity(g, packed, m.mma_forward(g, packed)).value();
  const model::Latent expected{c.latent_grid, c.latent_channels, eps.cells - m.tokens_to_latent(v).cells};
  EXPECT_EQ(frame.latent, expected);
  EXPECT_EQ(frame.image, m.decode_latent(expected));
}

TEST(Render, DeterministicForFixedSeed) {
  const auto& m = micro_model();
  auto g = fast();
  g.gamma = 2.0;
  RenderRequest req{kPrompt, four_steps(), 2, {{1, testkit::random_image(32, 3)}}, testkit::random_image(32, 4),
                    std::nullopt};
  const auto a = render_frame(m, vocab(), req, g, 5);
  const auto b = render_frame(m, vocab(), req, g, 5);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.latent, b.latent);
  EXPECT_NE(render_frame(m, vocab(), req, g, 6).latent, a.latent);
}

TEST(Render, UnitScaleRegionMatchesUnguided) {
  const auto& m = micro_model();
  RenderRequest req{kPrompt, four_steps(), 1, {}, std::nullopt, std::nullopt};
  const auto plain = render_frame(m, vocab(), req, fast(), 9);
  req.region = model::RegionMask{8, std::vector<bool>(64, false)};
  auto g = fast();
  g.s_entity = 3.0;
  EXPECT_EQ(render_frame(m, vocab(), req, g, 9).latent, plain.latent);
  req.region->inside.assign(64, true);
  EXPECT_NE(render_frame(m, vocab(), req, g, 9).latent, plain.latent);
}

TEST(Render, RequestErrors) {
  const auto& m = micro_model();
  RenderRequest req{kPrompt, four_steps(), 5, {}, std::nullopt, std::nullopt};
  EXPECT_THROW(render_frame(m, vocab(), req, fast(), 0), RangeError);
  req.step = 2;
  req.history = {{2, testkit::random_image(32, 1)}};
  EXPECT_THROW(render_frame(m, vocab(), req, fast(), 0), RangeError);
  req.history.clear();
  req.region = model::RegionMask{4, std::vector<bool>(16, true)};
  EXPECT_THROW(render_frame(m, vocab(), req, fast(), 0), ShapeError);
}

TEST(Sequence, FramesAlignWithPlanAndTrace) {
  const auto& m = micro_model();
  const auto plan = four_steps();
  const auto before = plan;
  const auto r = render_sequence(m, vocab(), kPrompt, plan, std::nullopt, fast(2), 11);
  EXPECT_EQ(plan, before);
  EXPECT_EQ(r.plan, plan);
  ASSERT_EQ(r.frames.size(), plan.size());
  ASSERT_EQ(r.trace.size(), plan.size());
  ASSERT_EQ(r.latents.size(), plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& tr = r.trace[i];
    EXPECT_EQ(tr.step, static_cast<int>(i) + 1);
    EXPECT_EQ(tr.history, scheduler::sample_history(i, 2));
    EXPECT_EQ(tr.step_text, plan.step(i + 1));
    EXPECT_EQ(tr.plan_hash, fnv1a64(render_plan(plan)));
    EXPECT_EQ(tr.seed, derive_seed(11, {i + 1}));
    EXPECT_FALSE(tr.reference);
  }
  const auto again = render_sequence(m, vocab(), kPrompt, plan, std::nullopt, fast(2), 11);
  EXPECT_EQ(again.frames, r.frames);
  EXPECT_EQ(trace_text(again), trace_text(r));
}

TEST(Sequence, TraceReplaysEachFrame) {
  const auto& m = micro_model();
  const auto r = render_sequence(m, vocab(), kPrompt, four_steps(), testkit::random_image(32, 12), fast(2), 13);
  for (const auto& tr : r.trace) {
    RenderRequest req{kPrompt, r.plan, tr.step, {}, testkit::random_image(32, 12), std::nullopt};
    for (int h : tr.history) req.history.emplace_back(h, r.frames[static_cast<std::size_t>(h - 1)]);
    EXPECT_EQ(render_frame(m, vocab(), req, fast(2), tr.seed).image, r.frames[static_cast<std::size_t>(tr.step - 1)]);
  }
}

TEST(Sequence, FailureCarriesPartialResult) {
  const auto& m = micro_model();
  try {
    render_sequence(m, vocab(), kPrompt, four_steps(), std::nullopt, fast(1), 1, model::RegionMask{3, std::vector<bool>(9, true)});
    FAIL() << "expected GenerationError";
  } catch (const GenerationError& e) {
    EXPECT_EQ(e.partial().plan, four_steps());
    EXPECT_TRUE(e.partial().frames.empty());
  }
}

TEST(Plan, GreedyDecodingIsDeterministic) {
  const auto& m = micro_model();
  const auto prefix = conditioning_prefix(kPrompt, vocab());
  EXPECT_EQ(decode_plan_tokens(m, prefix, {}, 1), decode_plan_tokens(m, prefix, {}, 2));
  const DecodeMode hot{DecodeKind::Temperature, 1.0};
  EXPECT_EQ(decode_plan_tokens(m, prefix, hot, 3), decode_plan_tokens(m, prefix, hot, 3));
  EXPECT_THROW(conditioning_prefix("", vocab()), ParseError);
}

TEST(Plan, UntrainedModelReportsFormatErrors) {
  const auto& m = micro_model();
  int failures = 0;
  const std::vector<std::string> prompts{"draw a red circle in four steps", "draw a blue star in three steps",
                                         "draw a green cup in six steps", "draw a yellow house in five steps"};
  for (const auto& p : prompts) {
    try {
      generate_plan(m, vocab(), p, std::nullopt, fast(), 1);
    } catch (const PlanFormatError& e) {
      ++failures;
      EXPECT_FALSE(std::string(e.what()).empty());
      EXPECT_EQ(e.raw_text().find("Step 1:"), std::string::npos);
    }
  }
  EXPECT_GE(failures, 3);
  try {
    generate_plan(m, vocab(), kPrompt, std::nullopt, fast(), 1);
  } catch (const PlanFormatError& e) {
    EXPECT_EQ(vocab().detokenize(vocab().tokenize(e.raw_text())), e.raw_text());
  }
}

TEST(Plan, ReferenceShapeIsChecked) {
  EXPECT_THROW(generate_plan(micro_model(), vocab(), kPrompt, model::Image::filled(16, 0, 0, 0), fast(), 1), ShapeError);
}

TEST(ResultIo, RoundTrip) {
  const auto& m = micro_model();
  auto r = render_sequence(m, vocab(), kPrompt, four_steps(), std::nullopt, fast(1), 21);
  testkit::TempDir dir("result");
  write_result(dir.path(), r);
  const auto back = read_result(dir.path());
  EXPECT_EQ(back.prompt, r.prompt);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.k_max, r.k_max);
  EXPECT_EQ(back.plan, r.plan);
  EXPECT_EQ(trace_text(back), trace_text(r));
  ASSERT_EQ(back.frames.size(), r.frames.size());
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    auto q = r.frames[i];
    toyworld::quantize(q);
    EXPECT_EQ(back.frames[i], q);
  }
  testkit::TempDir again("result2");
  write_result(again.path(), r);
  EXPECT_EQ(testkit::snapshot(dir.path()), testkit::snapshot(again.path()));
}
