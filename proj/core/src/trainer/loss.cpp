#include "loom/trainer/loss.hpp"

#include "loom/core/error.hpp"
#include "loom/trainer/flow.hpp"

namespace loom::trainer {

LossParts compute_loss(model::Graph& g, const model::LoomModel& model,
                       std::span<const TrainingInstance> batch, double lambda_ce) {
  if (batch.empty()) throw Error("compute_loss: empty batch");
  LossParts out;
  std::vector<model::Var> ce_terms;
  std::vector<model::Var> mse_terms;
  for (const auto& inst : batch) {
    const auto request = to_pack_request(inst, model);
    auto packed = model.pack(g, request);
    model::Var hidden = model.mma_forward(g, packed);

    if (!inst.drop_text) {
      const auto first = static_cast<Eigen::Index>(inst.prompt.size()) - 1;
      const auto count = static_cast<Eigen::Index>(inst.plan.size());
      model::Var logits = model.predict_text_logits(g, model::slice_rows(hidden, first, count));
      std::vector<int> targets(inst.plan.begin(), inst.plan.end());
      ce_terms.push_back(model::cross_entropy_sum(logits, targets));
      out.ce_positions += inst.plan.size();
    }

    const auto flow = corrupt(inst.target_latent.cells, inst.tau, inst.noise);
    model::Latent velocity{inst.target_latent.grid, inst.target_latent.channels, flow.target_velocity};
    model::Var pred = model.predict_velocity(g, packed, hidden);
    model::Var se = model::squared_error_sum(pred, model.latent_to_tokens(velocity));
    mse_terms.push_back(se);
    out.instance_mse_sum.push_back(se);
    out.mse_elements += static_cast<std::size_t>(velocity.cells.size());
    out.packed.push_back(std::move(packed));
  }

  auto sum = [&](const std::vector<model::Var>& terms) {
    model::Var acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = model::add(acc, terms[i]);
    return acc;
  };
  out.ce = ce_terms.empty() ? g.constant(model::Matrix::Zero(1, 1))
                            : model::scale(sum(ce_terms), 1.0 / static_cast<double>(out.ce_positions));
  out.mse = model::scale(sum(mse_terms), 1.0 / static_cast<double>(out.mse_elements));
  out.total = model::add(model::scale(out.ce, lambda_ce), out.mse);
  return out;
}

}  // namespace loom::trainer
