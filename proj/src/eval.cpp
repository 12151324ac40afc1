#include "pixelseg/eval.hpp"

#include <cmath>

#include "pixelseg/error.hpp"

namespace pixelseg {

SpliceResult splice_descriptions(const std::string& response_template, const MatchResult& match,
                                 const std::vector<std::string>& gt_descriptions) {
  std::size_t placeholders = 0;
  const std::string marker = kMaskPlaceholder;
  for (std::size_t pos = response_template.find(marker); pos != std::string::npos;
       pos = response_template.find(marker, pos + marker.size())) {
    ++placeholders;
  }
  if (placeholders != match.num_pred) {
    throw ContractError("splice_descriptions: " + std::to_string(placeholders) +
                        " placeholders vs " + std::to_string(match.num_pred) + " predictions");
  }
  if (gt_descriptions.size() != match.num_gt) {
    throw ContractError("splice_descriptions: " + std::to_string(gt_descriptions.size()) +
                        " descriptions vs " + std::to_string(match.num_gt) + " ground truths");
  }

  SpliceResult out;
  out.text = response_template;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < match.num_pred; ++j) {
    pos = out.text.find(marker, pos);
    const std::size_t gt = match.pred_to_gt[j];
    std::string replacement;
    if (match.gt_is_pad(gt)) {
      replacement = kNoMatchMarker;
      out.spliced.emplace_back();
    } else {
      replacement = "(" + gt_descriptions[gt] + ")";
      out.spliced.push_back(gt_descriptions[gt]);
    }
    out.text.replace(pos, marker.size(), replacement);
    pos += replacement.size();
  }
  return out;
}

std::vector<double> score_predictions(const SpliceResult& spliced,
                                      const std::vector<std::string>& expected_descriptions,
                                      const MatchResult& match, Scorer& scorer) {
  std::vector<double> out(match.num_pred, 0.0);
  if (match.num_pred == 0) return out;
  ScoreRequest request;
  request.text = spliced.text;
  request.num_predictions = match.num_pred;
  request.expected_descriptions = expected_descriptions;
  request.spliced_descriptions = spliced.spliced;
  const std::vector<int> raw = scorer.score(request);
  if (raw.size() != match.num_pred) {
    throw ProtocolError("score_predictions: scorer returned " + std::to_string(raw.size()) +
                        " scores for " + std::to_string(match.num_pred) + " predictions");
  }
  for (std::size_t j = 0; j < match.num_pred; ++j) {
    if (match.gt_is_pad(match.pred_to_gt[j])) {
      out[j] = 0.0;  // matched to nothing
    } else {
      out[j] = static_cast<double>(raw[j]) / 10.0;
    }
  }
  return out;
}

double gated_iou(const BinaryMask& pred, const BinaryMask& gt, double s) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw DimensionError("gated_iou: mask shapes differ");
  }
  const std::size_t uni = mask_union(pred, gt);
  if (uni == 0) return s > 0.5 ? 1.0 : 0.0;
  if (s <= 0.5) return 0.0;
  return static_cast<double>(mask_intersection(pred, gt)) / static_cast<double>(uni);
}

ImageEval evaluate_image(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                         const std::string& answer_template,
                         const std::vector<std::string>& gt_descriptions,
                         const std::vector<std::string>& expected_descriptions, Scorer& scorer,
                         const EvalOptions& options) {
  const MatchResult match = match_masks(preds, gts);
  const SpliceResult spliced = splice_descriptions(answer_template, match, gt_descriptions);
  const std::vector<double> scores = score_predictions(spliced, expected_descriptions, match, scorer);

  const std::size_t h = preds.empty() ? gts.front().height : preds.front().height;
  const std::size_t w = preds.empty() ? gts.front().width : preds.front().width;
  const BinaryMask empty = BinaryMask::zeros(h, w);

  ImageEval image;
  image.num_targets = gts.size();
  const std::size_t P = match.padded_size;
  double iou_sum = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    const std::size_t j = match.gt_to_pred[i];
    SlotResult slot;
    slot.gt_index = i;
    slot.pred_index = j;
    slot.pad_gt = match.gt_is_pad(i);
    slot.pad_pred = match.pred_is_pad(j);
    slot.score = slot.pad_pred ? 0.0 : scores[j];
    const BinaryMask& gt = slot.pad_gt ? empty : gts[i];
    const BinaryMask& pred = slot.pad_pred ? empty : preds[j];
    const std::size_t inter = mask_intersection(pred, gt);
    const std::size_t uni = mask_union(pred, gt);
    slot.union_area = static_cast<double>(uni);
    if (options.soft_product) {
      slot.effective_intersection = slot.score * static_cast<double>(inter);
      slot.iou = uni == 0 ? 0.0 : slot.effective_intersection / static_cast<double>(uni);
    } else {
      slot.effective_intersection = slot.score > 0.5 ? static_cast<double>(inter) : 0.0;
      slot.iou = gated_iou(pred, gt, slot.score);
    }
    iou_sum += slot.iou;
    image.slots.push_back(slot);
  }
  image.iou_img = P == 0 ? 0.0 : iou_sum / static_cast<double>(P);
  return image;
}

namespace {

SplitMetrics reduce(const std::vector<const ImageEval*>& images) {
  SplitMetrics m;
  m.num_images = images.size();
  double giou_sum = 0.0, inter_sum = 0.0, union_sum = 0.0;
  for (const ImageEval* img : images) {
    giou_sum += img->iou_img;
    for (const SlotResult& slot : img->slots) {
      inter_sum += slot.effective_intersection;
      union_sum += slot.union_area;
    }
  }
  m.giou = images.empty() ? 0.0 : giou_sum / static_cast<double>(images.size());
  m.ciou = union_sum > 0.0 ? inter_sum / union_sum : 0.0;
  return m;
}

}  // namespace

EvalReport aggregate(const std::vector<ImageEval>& images) {
  if (images.empty()) throw ContractError("aggregate: no images");
  EvalReport report;
  report.per_image = images;
  std::vector<const ImageEval*> few, many, all;
  for (const ImageEval& img : images) {
    all.push_back(&img);
    (img.num_targets <= 3 ? few : many).push_back(&img);
  }
  report.overall = reduce(all);
  if (!few.empty()) report.few = reduce(few);
  if (!many.empty()) report.many = reduce(many);
  return report;
}

}  // namespace pixelseg
