#include "loom/inference/guidance.hpp"

#include "loom/core/error.hpp"

namespace loom::inference {

namespace {

// Exact at gamma == 1 and gamma == 0, and a no-op when cond == uncond.
inline double guided(double c, double u, double s) { return s == 1.0 ? c : u + s * (c - u); }

void check_shapes(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("velocity shapes differ");
}

}  // namespace

void GuidanceConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (!(s_entity >= 0.0)) throw ConfigError("s_entity must be non-negative");
  if (ode_steps < 1) throw ConfigError("ode_steps must be at least 1");
  if (decode.kind == DecodeKind::Temperature && !(decode.temperature > 0.0)) {
    throw ConfigError("temperature must be positive");
  }
  if (!(retry_temperature > 0.0)) throw ConfigError("retry_temperature must be positive");
  if (k_max < 1) throw ConfigError("k_max must be at least 1");
  if (plan_retries < 0) throw ConfigError("plan_retries must be non-negative");
}

Matrix cfg_combine(const Matrix& cond, const Matrix& uncond, double gamma) {
  check_shapes(cond, uncond);
  Matrix out(cond.rows(), cond.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = guided(cond.data()[i], uncond.data()[i], gamma);
  return out;
}

Matrix localized_cfg(const Matrix& cond, const Matrix& uncond, double gamma, double s_entity,
                     const model::RegionMask& mask) {
  check_shapes(cond, uncond);
  if (static_cast<Eigen::Index>(mask.inside.size()) != cond.rows() ||
      static_cast<Eigen::Index>(mask.grid) * mask.grid != cond.rows()) {
    throw ShapeError("region mask does not match the latent grid");
  }
  Matrix out(cond.rows(), cond.cols());
  for (Eigen::Index r = 0; r < cond.rows(); ++r) {
    const double s = mask.inside[static_cast<std::size_t>(r)] ? s_entity : gamma;
    for (Eigen::Index c = 0; c < cond.cols(); ++c) out(r, c) = guided(cond(r, c), uncond(r, c), s);
  }
  return out;
}

}  // namespace loom::inference
