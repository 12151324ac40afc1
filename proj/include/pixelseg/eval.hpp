#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pixelseg/mask.hpp"
#include "pixelseg/matching.hpp"
#include "pixelseg/scorer.hpp"

namespace pixelseg {

// Literal placeholder emitted once per target in answer texts.
inline constexpr const char* kMaskPlaceholder = "[SEG]";
inline constexpr const char* kNoMatchMarker = "(no match)";

struct SpliceResult {
  std::string text;
  // Raw description spliced at each placeholder; empty for unmatched slots.
  std::vector<std::string> spliced;
};

// Replaces the k-th placeholder with the parenthesized description of the
// ground truth matched to prediction k, or with "(no match)" for predictions
// matched to a padded slot. Placeholder count must equal the prediction count.
SpliceResult splice_descriptions(const std::string& response_template, const MatchResult& match,
                                 const std::vector<std::string>& gt_descriptions);

// Normalized scores in [0,1] for the K real predictions: raw 1..10 scorer
// output divided by 10, with predictions matched to padded ground truths
// forced to exactly 0.
std::vector<double> score_predictions(const SpliceResult& spliced,
                                      const std::vector<std::string>& expected_descriptions,
                                      const MatchResult& match, Scorer& scorer);

// IoU with the relevance gate: the intersection is zeroed when s <= 0.5.
// A both-empty pair scores 1 when gated in, 0 when gated out.
double gated_iou(const BinaryMask& pred, const BinaryMask& gt, double s);

struct SlotResult {
  std::size_t gt_index = 0;
  std::size_t pred_index = 0;
  bool pad_gt = false;
  bool pad_pred = false;
  double score = 0.0;
  double iou = 0.0;
  double effective_intersection = 0.0;  // after gating or soft product
  double union_area = 0.0;
};

struct ImageEval {
  std::size_t num_targets = 0;  // G, drives the few/many split
  double iou_img = 0.0;         // sum of slot IoUs divided by P
  std::vector<SlotResult> slots;
};

struct EvalOptions {
  // Appendix-style hard gate at 0.5 by default; soft mode multiplies the
  // IoU by the score instead.
  bool soft_product = false;
};

// Runs matching, splicing, scoring and gating for one image.
ImageEval evaluate_image(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                         const std::string& answer_template,
                         const std::vector<std::string>& gt_descriptions,
                         const std::vector<std::string>& expected_descriptions, Scorer& scorer,
                         const EvalOptions& options = {});

struct SplitMetrics {
  std::size_t num_images = 0;
  double giou = 0.0;
  double ciou = 0.0;
};

struct EvalReport {
  std::optional<SplitMetrics> few;   // <= 3 targets
  std::optional<SplitMetrics> many;  // > 3 targets
  SplitMetrics overall;
  std::vector<ImageEval> per_image;
};

EvalReport aggregate(const std::vector<ImageEval>& images);

}  // namespace pixelseg
