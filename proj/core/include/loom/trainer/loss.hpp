#pragma once

#include <span>
#include <vector>

#include "loom/model/transformer.hpp"
#include "loom/trainer/instances.hpp"

namespace loom::trainer {

struct LossParts {
  model::Var total;
  model::Var ce;   // mean token cross-entropy over plan-target positions
  model::Var mse;  // mean squared velocity error over noised elements
  std::vector<model::Var> instance_mse_sum;  // per-instance squared-error sums
  std::vector<model::PackedBatch> packed;    // per-instance packing, for inspection
  std::size_t ce_positions = 0;
  std::size_t mse_elements = 0;
};

/// total = lambda_ce * ce + mse. Each instance is packed as its own sequence,
/// so no attention crosses instances.
LossParts compute_loss(model::Graph& g, const model::LoomModel& model,
                       std::span<const TrainingInstance> batch, double lambda_ce);

}  // namespace loom::trainer
