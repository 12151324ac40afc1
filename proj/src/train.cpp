#include "pixelseg/train.hpp"

#include <cmath>

#include "pixelseg/error.hpp"
#include "pixelseg/ops.hpp"

namespace pixelseg {

std::vector<TargetSpec> scene_specs(const SyntheticScene& scene) {
  std::vector<TargetSpec> specs;
  specs.reserve(scene.targets.size());
  for (std::size_t k = 0; k < scene.targets.size(); ++k) {
    specs.push_back({static_cast<int>(k), scene.targets[k].attributes});
  }
  return specs;
}

std::vector<Tensor> scene_gt_masks(const SyntheticScene& scene, std::size_t grid_h,
                                   std::size_t grid_w) {
  NoGradGuard ng;
  std::vector<Tensor> out;
  out.reserve(scene.targets.size());
  for (const SceneTarget& t : scene.targets) {
    Tensor gt = mask_to_tensor(t.mask);
    if (gt.dim(0) != grid_h || gt.dim(1) != grid_w) {
      gt = bilinear_resize(gt, grid_h, grid_w);
      for (double& v : gt.data()) v = v >= 0.5 ? 1.0 : 0.0;
    }
    out.push_back(std::move(gt));
  }
  return out;
}

Tensor scene_loss(const SegModel& model, const SyntheticScene& scene,
                  const LossWeights& weights) {
  const std::vector<MaskLogits> logits = model.forward(scene.image, scene_specs(scene));
  std::vector<Tensor> preds;
  preds.reserve(logits.size());
  for (const MaskLogits& m : logits) preds.push_back(sigmoid(m.fused));
  const std::vector<Tensor> gts =
      scene_gt_masks(scene, preds[0].dim(0), preds[0].dim(1));
  return total_mask_loss(preds, gts, weights);
}

TrainResult train_toy(SegModel& model, const std::vector<SyntheticScene>& scenes,
                      const TrainConfig& config, std::ostream* log,
                      const StepCallback& callback) {
  if (scenes.empty()) throw ContractError("train_toy: empty training set");
  if (config.batch_size == 0 || config.grad_accum_steps == 0 || config.total_steps == 0) {
    throw ConfigError("train_toy: batch size, accumulation and steps must be positive");
  }
  AdamWConfig optim_config = config.optim;
  optim_config.total_steps = config.total_steps;
  AdamW optimizer(model.params(), optim_config);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, scenes.size() - 1);
  Tape& tape = Tape::active();

  TrainResult result;
  const std::size_t scenes_per_step = config.batch_size * config.grad_accum_steps;
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    double step_loss = 0.0;
    try {
      for (std::size_t micro = 0; micro < config.grad_accum_steps; ++micro) {
        Tensor batch_loss;
        for (std::size_t b = 0; b < config.batch_size; ++b) {
          Tensor loss = scene_loss(model, scenes[pick(rng)], config.loss);
          batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
        }
        step_loss += batch_loss.value();
        tape.backward(batch_loss);
        tape.clear();
      }
    } catch (const NumericError& e) {
      tape.clear();
      throw NumericError("train_toy: step " + std::to_string(step) + ": " + e.what());
    }
    // Grads hold a sum over all scenes of the step; the optimizer rescales.
    optimizer.step(static_cast<double>(scenes_per_step));
    StepRecord record{step, optimizer.last_lr(), step_loss / static_cast<double>(scenes_per_step)};
    result.steps.push_back(record);
    result.final_loss = record.loss;
    if (log) {
      (*log) << "step " << record.step << " lr " << record.learning_rate << " loss "
             << record.loss << "\n";
    }
    if (callback && !callback(record)) break;
  }
  return result;
}

std::vector<BinaryMask> predict_masks(const SegModel& model, const SyntheticScene& scene) {
  NoGradGuard ng;
  const std::vector<MaskLogits> logits = model.forward(scene.image, scene_specs(scene));
  std::vector<BinaryMask> preds;
  preds.reserve(logits.size());
  // sigmoid(x) >= 0.5 exactly when the logit is non-negative.
  for (const MaskLogits& m : logits) preds.push_back(binarize(m.fused, 0.0));
  return preds;
}

double mean_mask_iou(const SegModel& model, const std::vector<SyntheticScene>& scenes) {
  if (scenes.empty()) throw ContractError("mean_mask_iou: empty scene set");
  double iou_sum = 0.0;
  std::size_t n = 0;
  for (const SyntheticScene& scene : scenes) {
    const std::vector<BinaryMask> preds = predict_masks(model, scene);
    const std::vector<Tensor> gts =
        scene_gt_masks(scene, preds[0].height, preds[0].width);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      const BinaryMask gt = binarize(gts[k], 0.5);
      const std::size_t uni = mask_union(preds[k], gt);
      iou_sum += uni == 0 ? 1.0
                          : static_cast<double>(mask_intersection(preds[k], gt)) /
                                static_cast<double>(uni);
      ++n;
    }
  }
  return iou_sum / static_cast<double>(n);
}

double overlap_pixel_rate(const SegModel& model, const std::vector<SyntheticScene>& scenes) {
  double rate_sum = 0.0;
  std::size_t n_scenes = 0;
  for (const SyntheticScene& scene : scenes) {
    if (scene.targets.size() < 2) continue;
    const std::vector<BinaryMask> preds = predict_masks(model, scene);
    const std::size_t pixels = preds[0].size();
    std::size_t overlapped = 0;
    for (std::size_t p = 0; p < pixels; ++p) {
      int claims = 0;
      for (const BinaryMask& m : preds) claims += m.data[p] ? 1 : 0;
      if (claims >= 2) ++overlapped;
    }
    rate_sum += static_cast<double>(overlapped) / static_cast<double>(pixels);
    ++n_scenes;
  }
  if (n_scenes == 0) throw ContractError("overlap_pixel_rate: no multi-target scenes");
  return rate_sum / static_cast<double>(n_scenes);
}

}  // namespace pixelseg
