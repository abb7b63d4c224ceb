#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loom/toyworld/canvas.hpp"

namespace loom::toyworld {

using model::RegionMask;

struct CompositionEntity {
  std::string entity;  // entity name, e.g. "subject"
  Subject subject = Subject::Circle;
  Color color = Color::Red;
  int radius = 5;
  int cx = 0;  // position in the scene
  int cy = 0;
  Image image;      // the entity alone, centered on its own canvas
  RegionMask mask;  // pixel mask of the entity in the scene

  int dx() const { return cx - kCanvasSize / 2; }
  int dy() const { return cy - kCanvasSize / 2; }
  std::string description() const;
};

struct CompositionSample {
  std::vector<CompositionEntity> entities;
  Image scene;
  std::string forward;  // integrate entities into one scene
  std::string reverse;  // decompose the scene into entities
};

CompositionSample gen_composition(std::uint64_t seed);

/// Rebuilds the scene from the centered entity images and their offsets.
Image recompose(const std::vector<CompositionEntity>& entities);

/// Coarsens a pixel mask onto a grid; a cell is inside when any of its
/// pixels is.
RegionMask downsample_mask(const RegionMask& mask, int grid);

std::size_t mask_area(const RegionMask& mask);

}  // namespace loom::toyworld
