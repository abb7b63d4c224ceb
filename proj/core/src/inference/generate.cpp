#include "loom/inference/generate.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "loom/core/random.hpp"
#include "loom/scheduler/sampling.hpp"
#include "loom/trainer/instances.hpp"

namespace loom::inference {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

TokenId pick_token(const model::Matrix& logits_row, const DecodeMode& mode, std::mt19937_64& rng) {
  if (mode.kind == DecodeKind::Greedy) {
    Eigen::Index best = 0;
    logits_row.row(0).maxCoeff(&best);
    return static_cast<TokenId>(best);
  }
  const double m = logits_row.maxCoeff();
  std::vector<double> w(static_cast<std::size_t>(logits_row.cols()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits_row.cols(); ++i) {
    w[static_cast<std::size_t>(i)] = std::exp((logits_row(0, i) - m) / mode.temperature);
    total += w[static_cast<std::size_t>(i)];
  }
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    u -= w[i];
    if (u < 0.0) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(w.size() - 1);
}

model::Matrix noise_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  model::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

model::Matrix velocity(const model::LoomModel& model, const model::PackRequest& req) {
  model::Graph g(false);
  auto packed = model.pack(g, req);
  auto hidden = model.mma_forward(g, packed);
  return model.predict_velocity(g, packed, hidden).value();
}

}  // namespace

std::vector<TokenId> conditioning_prefix(const std::string& prompt, const Vocabulary& vocab) {
  std::vector<TokenId> out{special::kBegin};
  const auto scaffold = vocab.tokenize(trainer::kScaffold);
  const auto p = vocab.tokenize(prompt);
  if (p.empty()) throw ParseError("prompt is empty");
  out.insert(out.end(), scaffold.begin(), scaffold.end());
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<TokenId> decode_plan_tokens(const model::LoomModel& model, const std::vector<TokenId>& prefix,
                                        const DecodeMode& mode, std::uint64_t seed) {
  const auto& cfg = model.config();
  // Leave room for a step description after the plan at render time.
  const int cap = cfg.max_text_len - static_cast<int>(prefix.size()) - 8;
  if (cap < 1) throw LayoutError("prompt too long for the model's text window");
  std::mt19937_64 rng(seed);
  std::vector<TokenId> text = prefix;
  std::vector<TokenId> out;
  for (int i = 0; i < cap; ++i) {
    model::Graph g(false);
    std::vector<int> ids(text.begin(), text.end());
    std::vector<int> pos(text.size());
    std::iota(pos.begin(), pos.end(), 0);
    auto emb = model::add(model::gather_rows(model.param(g, "text.embed"), ids),
                          model::gather_rows(model.param(g, "text.pos"), pos));
    std::vector<TokenSpan> spans{{0, text.size(), ModalityTag::Text, std::nullopt, SpanRole::Prompt}};
    auto packed = model.pack(g, emb, spans, std::nullopt);
    auto hidden = model.mma_forward(g, packed);
    auto logits = model.predict_text_logits(g, model::slice_rows(hidden, hidden.rows() - 1, 1));
    const TokenId next = pick_token(logits.value(), mode, rng);
    if (next == special::kEnd) break;
    out.push_back(next);
    text.push_back(next);
  }
  return out;
}

Plan generate_plan(const model::LoomModel& model, const Vocabulary& vocab, const std::string& prompt,
                   const std::optional<Image>& reference, const GuidanceConfig& guidance, std::uint64_t seed) {
  guidance.validate();
  if (reference) model.image_patches(*reference);
  const auto prefix = conditioning_prefix(prompt, vocab);
  std::string raw;
  std::string last_error;
  for (int attempt = 0; attempt <= guidance.plan_retries; ++attempt) {
    DecodeMode mode = guidance.decode;
    if (attempt > 0) mode = {DecodeKind::Temperature, guidance.retry_temperature};
    const auto ids = decode_plan_tokens(model, prefix, mode, derive_seed(seed, {0x91u, static_cast<std::uint64_t>(attempt)}));
    raw = vocab.detokenize(ids);
    try {
      return truncate_plan(parse_plan(raw), kMaxPlanSteps);
    } catch (const ParseError& e) {
      last_error = e.what();
    } catch (const StructureError& e) {
      last_error = e.what();
    }
  }
  throw PlanFormatError("decoded plan is malformed after " + std::to_string(guidance.plan_retries + 1) +
                            " attempts: " + last_error,
                        raw);
}

model::PackRequest conditional_request(const model::LoomModel& model, const Vocabulary& vocab,
                                       const RenderRequest& request, const model::Matrix& noised_tokens,
                                       double tau) {
  model::PackRequest req;
  req.prompt = conditioning_prefix(request.prompt, vocab);
  req.plan = vocab.tokenize(render_plan(request.plan));
  req.plan.push_back(special::kEnd);
  req.step = vocab.tokenize(request.plan.step(static_cast<std::size_t>(request.step)));
  if (request.reference) req.history.push_back(model.frame_tokens(*request.reference, 0));
  for (const auto& [index, image] : request.history) req.history.push_back(model.frame_tokens(image, index));
  req.target = model::TargetTokens{request.step, noised_tokens, tau};
  return req;
}

RenderedFrame render_frame(const model::LoomModel& model, const Vocabulary& vocab, const RenderRequest& request,
                           const GuidanceConfig& guidance, std::uint64_t seed) {
  guidance.validate();
  if (request.step < 1 || request.step > static_cast<int>(request.plan.size())) {
    throw RangeError("step " + std::to_string(request.step) + " outside the plan");
  }
  for (const auto& [index, image] : request.history) {
    if (index < 1 || index >= request.step) throw RangeError("history frame index out of range");
  }
  const auto& cfg = model.config();
  const int cells = cfg.latent_grid * cfg.latent_grid;
  if (request.region && (request.region->grid != cfg.latent_grid ||
                         static_cast<int>(request.region->inside.size()) != cells)) {
    throw ShapeError("region mask does not match the latent grid");
  }

  // Conditional request with history embedded once; only the target changes.
  model::Latent x{cfg.latent_grid, cfg.latent_channels, noise_matrix(cells, cfg.latent_channels, seed)};
  auto cond = conditional_request(model, vocab, request, model.latent_to_tokens(x), 1.0);
  model::PackRequest uncond;
  uncond.prompt = {special::kUnconditional};

  // With unit scales the unconditional velocity cannot change the result.
  const bool need_uncond = guidance.gamma != 1.0 || (request.region && guidance.s_entity != 1.0);
  const double dt = 1.0 / guidance.ode_steps;
  for (int i = 0; i < guidance.ode_steps; ++i) {
    const double tau = 1.0 - static_cast<double>(i) * dt;
    const model::Matrix tokens = model.latent_to_tokens(x);
    cond.target = model::TargetTokens{request.step, tokens, tau};
    const model::Latent vc = model.tokens_to_latent(velocity(model, cond));
    model::Matrix v = vc.cells;
    if (need_uncond) {
      uncond.target = model::TargetTokens{request.step, tokens, tau};
      const model::Latent vu = model.tokens_to_latent(velocity(model, uncond));
      v = request.region ? localized_cfg(vc.cells, vu.cells, guidance.gamma, guidance.s_entity, *request.region)
                         : cfg_combine(vc.cells, vu.cells, guidance.gamma);
    }
    x.cells = x.cells - dt * v;
  }
  return RenderedFrame{model.decode_latent(x), x};
}

InterleavedResult render_sequence(const model::LoomModel& model, const Vocabulary& vocab,
                                  const std::string& prompt, const Plan& plan,
                                  const std::optional<Image>& reference, const GuidanceConfig& guidance,
                                  std::uint64_t seed, const std::optional<model::RegionMask>& region) {
  InterleavedResult result;
  result.prompt = prompt;
  result.seed = seed;
  result.k_max = guidance.k_max;
  result.plan = plan;
  const std::uint64_t plan_hash = fnv1a64(render_plan(plan));
  for (int t = 1; t <= static_cast<int>(plan.size()); ++t) {
    FrameTrace tr;
    tr.step = t;
    tr.seed = derive_seed(seed, {static_cast<std::uint64_t>(t)});
    tr.history = scheduler::sample_history(t - 1, guidance.k_max);
    tr.reference = reference.has_value();
    tr.step_text = plan.step(static_cast<std::size_t>(t));
    tr.plan_hash = plan_hash;
    tr.gamma = guidance.gamma;
    tr.s_entity = guidance.s_entity;
    tr.ode_steps = guidance.ode_steps;

    RenderRequest req;
    req.prompt = prompt;
    req.plan = plan;
    req.step = t;
    req.reference = reference;
    req.region = region;
    for (int h : tr.history) req.history.emplace_back(h, result.frames[static_cast<std::size_t>(h - 1)]);
    try {
      auto frame = render_frame(model, vocab, req, guidance, tr.seed);
      result.frames.push_back(std::move(frame.image));
      result.latents.push_back(std::move(frame.latent));
      result.trace.push_back(std::move(tr));
    } catch (const Error& e) {
      throw GenerationError("frame " + std::to_string(t) + " failed: " + e.what(), std::move(result));
    }
  }
  return result;
}

InterleavedResult generate_interleaved(const model::LoomModel& model, const Vocabulary& vocab,
                                       const std::string& prompt, const std::optional<Image>& reference,
                                       const GuidanceConfig& guidance, std::uint64_t seed,
                                       const std::optional<model::RegionMask>& region) {
  const Plan plan = generate_plan(model, vocab, prompt, reference, guidance, seed);
  return render_sequence(model, vocab, prompt, plan, reference, guidance, seed, region);
}

}  // namespace loom::inference
