#pragma once

#include <optional>

#include "loom/model/autograd.hpp"
#include "loom/model/image.hpp"

namespace loom::inference {

using model::Matrix;

enum class DecodeKind { Greedy, Temperature };

struct DecodeMode {
  DecodeKind kind = DecodeKind::Greedy;
  double temperature = 1.0;
};

struct GuidanceConfig {
  double gamma = 1.0;     // text guidance scale
  double s_entity = 1.0;  // scale inside an entity region
  int ode_steps = 20;
  DecodeMode decode;
  int k_max = 2;
  int plan_retries = 3;
  double retry_temperature = 0.7;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

/// uncond + gamma * (cond - uncond), elementwise. gamma == 1 returns cond.
Matrix cfg_combine(const Matrix& cond, const Matrix& uncond, double gamma);

/// Per-cell scale: s_entity where the mask is set, gamma elsewhere. Velocities
/// are in cell layout (one row per latent cell).
Matrix localized_cfg(const Matrix& cond, const Matrix& uncond, double gamma, double s_entity,
                     const model::RegionMask& mask);

}  // namespace loom::inference
