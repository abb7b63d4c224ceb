#include "loom/toyworld/composition.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <map>
#include <random>

#include "loom/core/entities.hpp"
#include "loom/core/error.hpp"
#include "loom/core/random.hpp"
#include "loom/core/vocabulary.hpp"

namespace loom::toyworld {

namespace {

constexpr std::array<const char*, 3> kSlots = {"subject", "object", "bag"};

std::string join_entities(const std::vector<CompositionEntity>& ents) {
  std::string out;
  for (std::size_t i = 0; i < ents.size(); ++i) {
    if (i > 0) out += " and ";
    out += "the " + EntityVocabulary::token_for(ents[i].entity);
  }
  return out;
}

std::map<std::string, std::string> bindings(const std::vector<CompositionEntity>& ents) {
  std::map<std::string, std::string> out;
  for (const auto& e : ents) out[e.entity] = e.description();
  return out;
}

}  // namespace

std::string CompositionEntity::description() const {
  return std::string(to_string(color)) + " " + std::string(to_string(subject));
}

CompositionSample gen_composition(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {0xc0u}));
  auto pick = [&](std::uint64_t n) { return static_cast<int>(rng() % n); };

  CompositionSample out;
  const int n = 2 + pick(2);
  for (int i = 0; i < n; ++i) {
    CompositionEntity e;
    e.entity = kSlots[static_cast<std::size_t>(i)];
    e.subject = kSubjects[static_cast<std::size_t>(pick(kSubjects.size()))];
    e.color = kColors[static_cast<std::size_t>(pick(kColors.size()))];
    e.radius = 5 + pick(2);
    const auto centered = make_geometry(e.subject, kCanvasSize / 2, kCanvasSize / 2, e.radius);
    e.image = Image::filled(kCanvasSize, 1.0, 1.0, 1.0);
    draw_subject(e.image, centered, e.color, centered.outline.size(), true, true);
    out.entities.push_back(std::move(e));
  }

  // Rejection sampling with a one-pixel gap between bounding boxes; a layout
  // that gets stuck is restarted from scratch.
  for (int layout = 0;; ++layout) {
    if (layout > 1000) throw Error("composition placement did not converge");
    bool placed_all = true;
    for (std::size_t i = 0; i < out.entities.size() && placed_all; ++i) {
      auto& e = out.entities[i];
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        const int lo = e.radius + 1;
        const int span = kCanvasSize - 2 * lo;
        e.cx = lo + pick(static_cast<std::uint64_t>(span));
        e.cy = lo + pick(static_cast<std::uint64_t>(span));
        placed = true;
        for (std::size_t j = 0; j < i; ++j) {
          const auto& o = out.entities[j];
          const int gap = e.radius + o.radius + 2;
          if (std::abs(e.cx - o.cx) < gap && std::abs(e.cy - o.cy) < gap) placed = false;
        }
      }
      placed_all = placed;
    }
    if (placed_all) break;
  }

  out.scene = Image::filled(kCanvasSize, 1.0, 1.0, 1.0);
  for (auto& e : out.entities) {
    const auto geom = make_geometry(e.subject, e.cx, e.cy, e.radius);
    draw_subject(out.scene, geom, e.color, geom.outline.size(), true, true);
    e.mask.grid = kCanvasSize;
    e.mask.inside.assign(static_cast<std::size_t>(kCanvasSize * kCanvasSize), false);
    for (int idx : geom.subject) e.mask.inside[static_cast<std::size_t>(idx)] = true;
  }

  const auto b = bindings(out.entities);
  out.forward = bind_entities("place " + join_entities(out.entities) + " on one canvas", b);
  out.reverse = bind_entities("split the scene into " + join_entities(out.entities), b);
  return out;
}

Image recompose(const std::vector<CompositionEntity>& entities) {
  Image scene = Image::filled(kCanvasSize, 1.0, 1.0, 1.0);
  for (const auto& e : entities) {
    for (int y = 0; y < kCanvasSize; ++y) {
      for (int x = 0; x < kCanvasSize; ++x) {
        if (!e.mask.inside[static_cast<std::size_t>(y * kCanvasSize + x)]) continue;
        scene.pixels.row(y * kCanvasSize + x) =
            e.image.pixels.row((y - e.dy()) * kCanvasSize + (x - e.dx()));
      }
    }
  }
  return scene;
}

RegionMask downsample_mask(const RegionMask& mask, int grid) {
  if (grid <= 0 || mask.grid % grid != 0) throw ShapeError("mask grid does not divide evenly");
  const int f = mask.grid / grid;
  RegionMask out;
  out.grid = grid;
  out.inside.assign(static_cast<std::size_t>(grid * grid), false);
  for (int y = 0; y < mask.grid; ++y) {
    for (int x = 0; x < mask.grid; ++x) {
      if (mask.inside[static_cast<std::size_t>(y * mask.grid + x)]) {
        out.inside[static_cast<std::size_t>((y / f) * grid + x / f)] = true;
      }
    }
  }
  return out;
}

std::size_t mask_area(const RegionMask& mask) {
  return static_cast<std::size_t>(std::count(mask.inside.begin(), mask.inside.end(), true));
}

}  // namespace loom::toyworld
