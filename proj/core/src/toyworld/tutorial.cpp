#include "loom/toyworld/tutorial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "loom/core/error.hpp"
#include "loom/core/random.hpp"

namespace loom::toyworld {

namespace {

constexpr std::array<const char*, 4> kCountWords = {"three", "four", "five", "six"};

}  // namespace

std::vector<Phase> TutorialSpec::phases() const {
  std::vector<Phase> out(static_cast<std::size_t>(n_steps - 2), Phase::Sketch);
  out.push_back(Phase::Color);
  out.push_back(Phase::Detail);
  return out;
}

TutorialSpec sample_tutorial_spec(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {0x7u}));
  auto pick = [&](std::uint64_t n) { return static_cast<int>(rng() % n); };
  TutorialSpec spec;
  spec.subject = kSubjects[static_cast<std::size_t>(pick(kSubjects.size()))];
  spec.color = kColors[static_cast<std::size_t>(pick(kColors.size()))];
  spec.n_steps = kMinTutorialSteps + pick(kMaxTutorialSteps - kMinTutorialSteps + 1);
  spec.cx = kCanvasSize / 2 - 3 + pick(7);
  spec.cy = kCanvasSize / 2 - 3 + pick(7);
  spec.radius = 9 + pick(3);
  return spec;
}

std::string tutorial_prompt(Subject s, Color c, int n_steps) {
  if (n_steps < kMinTutorialSteps || n_steps > kMaxTutorialSteps) {
    throw RangeError("tutorial step count out of range: " + std::to_string(n_steps));
  }
  std::ostringstream os;
  os << "draw a " << to_string(c) << ' ' << to_string(s) << " in "
     << kCountWords[static_cast<std::size_t>(n_steps - kMinTutorialSteps)] << " steps";
  return os.str();
}

TutorialSpec parse_tutorial_prompt(const std::string& prompt) {
  std::istringstream is(prompt);
  std::vector<std::string> w;
  for (std::string tok; is >> tok;) w.push_back(tok);
  if (w.size() != 7 || w[0] != "draw" || w[1] != "a" || w[4] != "in" || w[6] != "steps") {
    throw ParseError("not a tutorial prompt: '" + prompt + "'");
  }
  TutorialSpec spec;
  spec.color = color_from_string(w[2]);
  spec.subject = subject_from_string(w[3]);
  auto it = std::find(kCountWords.begin(), kCountWords.end(), w[5]);
  if (it == kCountWords.end()) throw ParseError("unknown step count: " + w[5]);
  spec.n_steps = kMinTutorialSteps + static_cast<int>(it - kCountWords.begin());
  return spec;
}

Plan canonical_plan(Subject s, Color c, int n_steps) {
  if (n_steps < kMinTutorialSteps || n_steps > kMaxTutorialSteps) {
    throw RangeError("tutorial step count out of range: " + std::to_string(n_steps));
  }
  const std::string subject(to_string(s));
  const int m = n_steps - 2;
  Plan plan;
  for (int k = 1; k <= m; ++k) {
    if (m == 1) {
      plan.steps.push_back("sketch the full " + subject + " outline");
    } else if (k == 1) {
      plan.steps.push_back("sketch the " + subject + " outline");
    } else if (k == m) {
      plan.steps.push_back("finish the outline");
    } else {
      plan.steps.push_back("continue the outline");
    }
  }
  plan.steps.push_back("fill the " + subject + " with " + std::string(to_string(c)));
  plan.steps.push_back("add the final details");
  return plan;
}

std::size_t outline_pixels_at(std::size_t outline_size, int k, int m) {
  return outline_size * static_cast<std::size_t>(k) / static_cast<std::size_t>(m);
}

Tutorial render_tutorial(const TutorialSpec& spec) {
  Tutorial tut;
  tut.spec = spec;
  tut.prompt = tutorial_prompt(spec.subject, spec.color, spec.n_steps);
  tut.plan = canonical_plan(spec.subject, spec.color, spec.n_steps);
  tut.geometry = make_geometry(spec.subject, spec.cx, spec.cy, spec.radius);
  const int m = spec.n_steps - 2;
  const auto phases = spec.phases();
  for (int t = 1; t <= spec.n_steps; ++t) {
    Image img = Image::filled(kCanvasSize, 1.0, 1.0, 1.0);
    const Phase ph = phases[static_cast<std::size_t>(t - 1)];
    const std::size_t drawn = ph == Phase::Sketch
                                  ? outline_pixels_at(tut.geometry.outline.size(), t, m)
                                  : tut.geometry.outline.size();
    draw_subject(img, tut.geometry, spec.color, drawn, ph != Phase::Sketch, ph == Phase::Detail);
    tut.frames.push_back(std::move(img));
  }
  return tut;
}

Tutorial gen_tutorial(std::uint64_t seed) { return render_tutorial(sample_tutorial_spec(seed)); }

double progress(const Image& img, const Image& final_frame, const SubjectGeometry& geom) {
  if (img.size != final_frame.size) throw ShapeError("progress: image size mismatch");
  if (geom.subject.empty()) return 0.0;
  double total = 0.0;
  for (int idx : geom.subject) {
    const auto a = img.pixels.row(idx);
    const auto b = final_frame.pixels.row(idx);
    const double err = (a - b).cwiseAbs().maxCoeff();
    total += std::clamp(1.0 - err / 0.5, 0.0, 1.0);
  }
  return total / static_cast<double>(geom.subject.size());
}

}  // namespace loom::toyworld
