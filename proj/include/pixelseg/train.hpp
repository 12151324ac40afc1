#pragma once

#include <functional>
#include <ostream>

#include "pixelseg/losses.hpp"
#include "pixelseg/model.hpp"
#include "pixelseg/optim.hpp"
#include "pixelseg/synthetic.hpp"

namespace pixelseg {

struct TrainConfig {
  LossWeights loss;
  AdamWConfig optim;
  std::size_t batch_size = 16;
  std::size_t grad_accum_steps = 10;
  std::size_t total_steps = 2000;
  std::uint64_t seed = 0;
};

struct StepRecord {
  std::size_t step = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  double final_loss = 0.0;
};

std::vector<TargetSpec> scene_specs(const SyntheticScene& scene);

// Ground-truth masks resampled to the decoder's fused-mask grid.
std::vector<Tensor> scene_gt_masks(const SyntheticScene& scene, std::size_t grid_h,
                                   std::size_t grid_w);

// Mask loss of one scene: sigmoid of every fused logit map against the
// scene's masks under the configured weights.
Tensor scene_loss(const SegModel& model, const SyntheticScene& scene, const LossWeights& weights);

// Optional per-step callback; returning false stops training early.
using StepCallback = std::function<bool(const StepRecord&)>;

// Mini-batches are drawn iid from `scenes` by a seeded generator; each
// optimizer step accumulates grad_accum_steps micro-batches. A NaN/Inf loss
// aborts with a NumericError naming the failing step.
TrainResult train_toy(SegModel& model, const std::vector<SyntheticScene>& scenes,
                      const TrainConfig& config, std::ostream* log = nullptr,
                      const StepCallback& callback = {});

// Binarized fused-mask predictions, one per target, on the fused grid.
std::vector<BinaryMask> predict_masks(const SegModel& model, const SyntheticScene& scene);

// Mean IoU of prediction k against ground truth k over all targets.
double mean_mask_iou(const SegModel& model, const std::vector<SyntheticScene>& scenes);

// Fraction of pixels claimed by two or more predicted masks, averaged over
// scenes with at least two targets.
double overlap_pixel_rate(const SegModel& model, const std::vector<SyntheticScene>& scenes);

}  // namespace pixelseg
