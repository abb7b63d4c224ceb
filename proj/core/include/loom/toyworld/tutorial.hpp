#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loom/core/plan.hpp"
#include "loom/toyworld/canvas.hpp"

namespace loom::toyworld {

inline constexpr int kMinTutorialSteps = 3;
inline constexpr int kMaxTutorialSteps = 6;

enum class Phase { Sketch, Color, Detail };

struct TutorialSpec {
  Subject subject = Subject::Circle;
  Color color = Color::Red;
  int n_steps = 3;
  int cx = kCanvasSize / 2;
  int cy = kCanvasSize / 2;
  int radius = 10;

  /// One phase per step: n-2 sketch steps, then color, then detail.
  std::vector<Phase> phases() const;
};

struct Tutorial {
  TutorialSpec spec;
  std::string prompt;
  Plan plan;
  std::vector<Image> frames;  // frames[t-1] is the state after step t
  SubjectGeometry geometry;

  const Image& final_frame() const { return frames.back(); }
};

TutorialSpec sample_tutorial_spec(std::uint64_t seed);
Tutorial render_tutorial(const TutorialSpec& spec);
Tutorial gen_tutorial(std::uint64_t seed);

std::string tutorial_prompt(Subject s, Color c, int n_steps);
Plan canonical_plan(Subject s, Color c, int n_steps);
/// Inverse of tutorial_prompt. Throws ParseError on anything else.
TutorialSpec parse_tutorial_prompt(const std::string& prompt);

/// Completion of `img` towards `final_frame`, in [0,1]: the mean over subject
/// pixels of a per-pixel credit that is 1 on an exact match and falls to 0
/// once any channel is off by 0.5 or more.
double progress(const Image& img, const Image& final_frame, const SubjectGeometry& geom);

/// Number of outline pixels drawn after sketch step k of m.
std::size_t outline_pixels_at(std::size_t outline_size, int k, int m);

}  // namespace loom::toyworld
