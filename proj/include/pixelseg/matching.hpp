#pragma once

#include <vector>

#include "pixelseg/mask.hpp"

namespace pixelseg {

// Matching cost between a ground-truth mask and a prediction: mean binary
// cross-entropy treating the prediction as a clamped probability, plus the
// smoothed dice loss. The dice term is symmetric in its arguments; the BCE
// term is not (the prediction side is the probability).
double pair_cost(const BinaryMask& gt, const BinaryMask& pred);

struct MatchResult {
  std::size_t padded_size = 0;  // P = max(G, K)
  std::size_t num_gt = 0;       // G
  std::size_t num_pred = 0;     // K
  // sigma: ground-truth slot i is assigned prediction slot gt_to_pred[i].
  std::vector<std::size_t> gt_to_pred;
  std::vector<std::size_t> pred_to_gt;
  std::vector<std::vector<double>> cost;  // P x P pairwise costs
  // Selected entries summed in ascending value order, so equal-cost
  // assignments (padding creates exact duplicates) total identically.
  double total_cost = 0.0;

  bool gt_is_pad(std::size_t i) const { return i >= num_gt; }
  bool pred_is_pad(std::size_t j) const { return j >= num_pred; }
};

// Exact minimum-cost assignment on an n x n matrix (Hungarian algorithm,
// O(n^3) shortest augmenting paths). Returns row -> column.
std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost);

// Pads the smaller set with all-zero masks to P = max(G, K), builds the
// pairwise cost matrix and solves for the minimum-cost permutation. A padded
// slot therefore costs exactly what matching the real mask against an empty
// mask costs.
MatchResult match_masks(const std::vector<BinaryMask>& preds,
                        const std::vector<BinaryMask>& gts);

// Canonical total of an assignment: chosen entries summed in ascending order.
double assignment_total(const std::vector<std::vector<double>>& cost,
                        const std::vector<std::size_t>& gt_to_pred);

}  // namespace pixelseg
