#pragma once

#include "loom/model/autograd.hpp"

namespace loom::trainer {

using model::Matrix;

/// Straight-line interpolation with data at tau = 0 and noise at tau = 1.
struct FlowState {
  Matrix x_tau;
  double tau = 0.0;
  Matrix target_velocity;  // eps - x_data
};

FlowState corrupt(const Matrix& latent, double tau, const Matrix& eps);

}  // namespace loom::trainer
