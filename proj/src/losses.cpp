#include "pixelseg/losses.hpp"

#include "pixelseg/error.hpp"
#include "pixelseg/ops.hpp"

namespace pixelseg {

namespace {

void require_pair(const char* op, const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError(std::string(op) + ": pred " + shape_str(pred.shape()) +
                         " vs target " + shape_str(target.shape()));
  }
}

void require_matched_sets(const char* op, const std::vector<Tensor>& preds,
                          const std::vector<Tensor>& targets) {
  if (preds.empty()) throw ContractError(std::string(op) + ": empty prediction set");
  if (preds.size() != targets.size()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(targets.size()) + " targets");
  }
  for (std::size_t k = 0; k < preds.size(); ++k) require_pair(op, preds[k], targets[k]);
}

}  // namespace

Tensor bce_per_pixel(const Tensor& pred, const Tensor& target) {
  require_pair("bce_per_pixel", pred, target);
  Tensor p = clamp(pred, kProbEps, 1.0 - kProbEps);
  Tensor ones = Tensor::full(pred.shape(), 1.0);
  Tensor pos = mul(target, log_elem(p));
  Tensor neg = mul(sub(ones, target), log_elem(sub(ones, p)));
  return scalar_mul(add(pos, neg), -1.0);
}

Tensor dice_loss(const Tensor& pred, const Tensor& target) {
  require_pair("dice_loss", pred, target);
  Tensor overlap = sum_all(mul(pred, target));
  Tensor num = add_scalar(scalar_mul(overlap, 2.0), kDiceEps);
  Tensor den = add_scalar(add(sum_all(pred), sum_all(target)), kDiceEps);
  return add_scalar(scalar_mul(div(num, den), -1.0), 1.0);
}

Tensor refinement_weight_map(const std::vector<Tensor>& preds, double alpha) {
  if (preds.empty()) throw ContractError("refinement_weight_map: empty prediction set");
  const Shape& shape = preds[0].shape();
  for (const Tensor& p : preds) {
    if (p.shape() != shape) throw DimensionError("refinement_weight_map: mixed mask shapes");
  }
  Tensor map = Tensor::full(shape, 1.0);
  const std::size_t n = map.numel();
  for (std::size_t i = 0; i < n; ++i) {
    int claims = 0;
    for (const Tensor& p : preds) claims += p.data()[i] >= 0.5 ? 1 : 0;
    if (claims >= 2) map.data()[i] = alpha;
  }
  return map;
}

Tensor target_refinement_loss(const std::vector<Tensor>& preds,
                              const std::vector<Tensor>& targets, double alpha) {
  require_matched_sets("target_refinement_loss", preds, targets);
  Tensor weight_map = refinement_weight_map(preds, alpha);
  Tensor acc;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    Tensor weighted = sum_all(mul(weight_map, bce_per_pixel(preds[k], targets[k])));
    acc = acc.defined() ? add(acc, weighted) : weighted;
  }
  const double denom = static_cast<double>(preds.size()) * static_cast<double>(preds[0].numel());
  return scalar_mul(acc, 1.0 / denom);
}

Tensor total_mask_loss(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets,
                       const LossWeights& weights) {
  require_matched_sets("total_mask_loss", preds, targets);
  if (weights.alpha < 1.0 || weights.lambda_ref < 0.0 || weights.lambda_dice < 0.0) {
    throw ContractError("total_mask_loss: alpha must be >= 1 and lambdas non-negative");
  }
  Tensor ref = target_refinement_loss(preds, targets, weights.alpha);
  Tensor dice_acc;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    Tensor d = dice_loss(preds[k], targets[k]);
    dice_acc = dice_acc.defined() ? add(dice_acc, d) : d;
  }
  Tensor dice_mean = scalar_mul(dice_acc, 1.0 / static_cast<double>(preds.size()));
  return add(scalar_mul(ref, weights.lambda_ref), scalar_mul(dice_mean, weights.lambda_dice));
}

}  // namespace pixelseg
