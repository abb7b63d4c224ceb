#include "loom/trainer/flow.hpp"

#include "loom/core/error.hpp"

namespace loom::trainer {

FlowState corrupt(const Matrix& latent, double tau, const Matrix& eps) {
  if (latent.rows() != eps.rows() || latent.cols() != eps.cols()) {
    throw ShapeError("noise shape does not match the latent");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw RangeError("tau must lie in [0, 1]");
  FlowState s;
  s.tau = tau;
  s.x_tau = (1.0 - tau) * latent + tau * eps;
  s.target_velocity = eps - latent;
  return s;
}

}  // namespace loom::trainer
