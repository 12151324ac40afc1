#pragma once

#include <vector>

#include "pixelseg/tensor.hpp"

namespace pixelseg {

struct LossWeights {
  double alpha = 2.0;
  double lambda_ref = 2.0;
  double lambda_dice = 0.5;
};

// Probabilities are clamped to [kProbEps, 1-kProbEps] before any log.
inline constexpr double kProbEps = 1e-7;
// Additive smoothing keeping empty-vs-empty dice at zero loss.
inline constexpr double kDiceEps = 1.0;

// Elementwise -[y log p + (1-y) log(1-p)]; pred holds probabilities, target
// is binary. Returns the per-pixel loss map.
Tensor bce_per_pixel(const Tensor& pred, const Tensor& target);

// Soft dice on probabilities: 1 - (2*sum(p*y)+eps) / (sum(p)+sum(y)+eps).
Tensor dice_loss(const Tensor& pred, const Tensor& target);

// Pixel weight map over K binarized predictions: alpha where two or more
// masks claim a pixel, 1 elsewhere. Detached from the tape.
Tensor refinement_weight_map(const std::vector<Tensor>& preds, double alpha);

// (1/KHW) sum_k sum_i A_i * BCE(pred_k_i, target_k_i). The weight map is
// built from binarized, detached predictions; gradient flows only through
// the BCE term.
Tensor target_refinement_loss(const std::vector<Tensor>& preds,
                              const std::vector<Tensor>& targets, double alpha);

// lambda_ref * L_ref + lambda_dice * mean_k dice_k.
Tensor total_mask_loss(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets,
                       const LossWeights& weights);

}  // namespace pixelseg
