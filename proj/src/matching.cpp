#include "pixelseg/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pixelseg/error.hpp"
#include "pixelseg/losses.hpp"

namespace pixelseg {

BinaryMask binarize(const Tensor& t, double threshold) {
  if (t.rank() != 2) throw DimensionError("binarize: expected (H,W)");
  BinaryMask m = BinaryMask::zeros(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.numel(); ++i) m.data[i] = t.data()[i] >= threshold ? 1 : 0;
  return m;
}

std::size_t mask_intersection(const BinaryMask& a, const BinaryMask& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) n += (a.data[i] && b.data[i]) ? 1 : 0;
  return n;
}

std::size_t mask_union(const BinaryMask& a, const BinaryMask& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) n += (a.data[i] || b.data[i]) ? 1 : 0;
  return n;
}

double pair_cost(const BinaryMask& gt, const BinaryMask& pred) {
  if (gt.height != pred.height || gt.width != pred.width) {
    throw DimensionError("pair_cost: mask shapes differ");
  }
  double bce = 0.0;
  std::size_t inter = 0, sum_pred = 0, sum_gt = 0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const double y = gt.data[i] ? 1.0 : 0.0;
    const double p = pred.data[i] ? 1.0 - kProbEps : kProbEps;
    bce += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    inter += (gt.data[i] && pred.data[i]) ? 1 : 0;
    sum_pred += pred.data[i] ? 1 : 0;
    sum_gt += gt.data[i] ? 1 : 0;
  }
  bce /= static_cast<double>(gt.data.size());
  const double dice = 1.0 - (2.0 * static_cast<double>(inter) + kDiceEps) /
                                (static_cast<double>(sum_pred + sum_gt) + kDiceEps);
  return bce + dice;
}

std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) throw ContractError("solve_assignment: empty cost matrix");
  for (const auto& row : cost) {
    if (row.size() != n) throw DimensionError("solve_assignment: matrix must be square");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

MatchResult match_masks(const std::vector<BinaryMask>& preds,
                        const std::vector<BinaryMask>& gts) {
  if (preds.empty() && gts.empty()) {
    throw ContractError("match_masks: prediction and ground-truth sets both empty");
  }
  const BinaryMask& ref = preds.empty() ? gts.front() : preds.front();
  for (const std::vector<BinaryMask>* list : {&preds, &gts}) {
    for (const BinaryMask& m : *list) {
      if (m.height != ref.height || m.width != ref.width) {
        throw DimensionError("match_masks: mixed mask shapes");
      }
    }
  }

  MatchResult result;
  result.num_gt = gts.size();
  result.num_pred = preds.size();
  result.padded_size = std::max(gts.size(), preds.size());
  const std::size_t P = result.padded_size;
  const BinaryMask empty = BinaryMask::zeros(ref.height, ref.width);

  result.cost.assign(P, std::vector<double>(P, 0.0));
  for (std::size_t i = 0; i < P; ++i) {
    const BinaryMask& gt = i < gts.size() ? gts[i] : empty;
    for (std::size_t j = 0; j < P; ++j) {
      const BinaryMask& pred = j < preds.size() ? preds[j] : empty;
      result.cost[i][j] = pair_cost(gt, pred);
    }
  }
  result.gt_to_pred = solve_assignment(result.cost);
  result.pred_to_gt.assign(P, 0);
  for (std::size_t i = 0; i < P; ++i) result.pred_to_gt[result.gt_to_pred[i]] = i;
  result.total_cost = assignment_total(result.cost, result.gt_to_pred);
  return result;
}

double assignment_total(const std::vector<std::vector<double>>& cost,
                        const std::vector<std::size_t>& gt_to_pred) {
  std::vector<double> chosen;
  chosen.reserve(cost.size());
  for (std::size_t i = 0; i < cost.size(); ++i) chosen.push_back(cost[i][gt_to_pred[i]]);
  std::sort(chosen.begin(), chosen.end());
  double total = 0.0;
  for (double c : chosen) total += c;
  return total;
}

}  // namespace pixelseg
