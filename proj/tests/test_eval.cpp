#include <random>

#include "doctest.h"
#include "pixelseg/eval.hpp"

using namespace pixelseg;

namespace {

BinaryMask box_mask(std::size_t h, std::size_t w, std::size_t y0, std::size_t x0, std::size_t y1,
                    std::size_t x1) {
  BinaryMask m = BinaryMask::zeros(h, w);
  for (std::size_t y = y0; y < y1; ++y) {
    for (std::size_t x = x0; x < x1; ++x) m.at(y, x) = 1;
  }
  return m;
}

}  // namespace

TEST_CASE("gated IoU fixtures") {
  BinaryMask gt = box_mask(4, 4, 0, 0, 2, 4);    // area 8
  BinaryMask half = box_mask(4, 4, 1, 0, 3, 4);  // overlaps rows 1..2: inter 4, union 12

  CHECK(gated_iou(gt, gt, 1.0) == 1.0);
  CHECK(gated_iou(gt, gt, 0.4) == 0.0);  // gate at s <= 0.5
  CHECK(gated_iou(half, gt, 0.9) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(gated_iou(half, gt, 0.5) == 0.0);

  const BinaryMask empty = BinaryMask::zeros(4, 4);
  CHECK(gated_iou(empty, empty, 0.9) == 1.0);  // both-empty convention
  CHECK(gated_iou(empty, empty, 0.1) == 0.0);
}

TEST_CASE("splice replaces placeholders with matched descriptions") {
  std::mt19937_64 rng(11);
  BinaryMask m = box_mask(4, 4, 0, 0, 2, 2);
  SUBCASE("single match mirrors the documented sentence") {
    MatchResult match = match_masks({m}, {m});
    SpliceResult out = splice_descriptions("Sit in the kayak [SEG] and paddle.", match,
                                           {"a red kayak parked on the beach"});
    CHECK(out.text == "Sit in the kayak (a red kayak parked on the beach) and paddle.");
    CHECK(out.spliced == std::vector<std::string>{"a red kayak parked on the beach"});
  }
  SUBCASE("no placeholders, no predictions") {
    MatchResult match = match_masks({}, {m});
    SpliceResult out = splice_descriptions("Nothing to segment here.", match, {"a box"});
    CHECK(out.text == "Nothing to segment here.");
  }
  SUBCASE("swap assignment splices in swapped order") {
    BinaryMask a = box_mask(6, 6, 0, 0, 2, 2);
    BinaryMask b = box_mask(6, 6, 4, 4, 6, 6);
    // Predictions [b, a]; ground truths [a, b]: optimal match is the swap.
    MatchResult match = match_masks({b, a}, {a, b});
    SpliceResult out = splice_descriptions("first [SEG], second [SEG]", match,
                                           {"the upper box", "the lower box"});
    CHECK(out.text == "first (the lower box), second (the upper box)");
  }
  SUBCASE("prediction matched to padding becomes a no-match marker") {
    MatchResult match = match_masks({m, BinaryMask::zeros(4, 4)}, {m});
    SpliceResult out = splice_descriptions("a [SEG] b [SEG]", match, {"the box"});
    CHECK(out.text == "a (the box) b (no match)");
  }
  SUBCASE("placeholder count must equal prediction count") {
    MatchResult match = match_masks({m}, {m});
    CHECK_THROWS_AS(splice_descriptions("no placeholder", match, {"d"}), ContractError);
    CHECK_THROWS_AS(splice_descriptions("[SEG] [SEG]", match, {"d"}), ContractError);
  }
}

TEST_CASE("score normalization and forced zeros") {
  BinaryMask m = box_mask(4, 4, 0, 0, 2, 2);
  SUBCASE("raw 7 becomes 0.7") {
    MatchResult match = match_masks({m}, {m});
    SpliceResult spliced = splice_descriptions("x [SEG]", match, {"the box"});
    StubScorer scorer(StubMode::kConstant, 7);
    const std::vector<double> s = score_predictions(spliced, {"the box"}, match, scorer);
    CHECK(s == std::vector<double>{0.7});
  }
  SUBCASE("predictions matched to padding score exactly zero") {
    MatchResult match = match_masks({m, BinaryMask::zeros(4, 4)}, {m});
    SpliceResult spliced = splice_descriptions("x [SEG] y [SEG]", match, {"the box"});
    StubScorer scorer(StubMode::kConstant, 10);
    const std::vector<double> s = score_predictions(spliced, {"the box", "ghost"}, match, scorer);
    CHECK(s[0] == 1.0);
    CHECK(s[1] == 0.0);
  }
}

TEST_CASE("per-image evaluation and aggregation fixtures") {
  BinaryMask gt0 = box_mask(8, 8, 0, 0, 4, 4);
  BinaryMask gt1 = box_mask(8, 8, 4, 4, 8, 8);
  StubScorer perfect(StubMode::kConstant, 10);

  SUBCASE("perfect predictions score gIoU = cIoU = 1") {
    ImageEval img = evaluate_image({gt0, gt1}, {gt0, gt1}, "a [SEG] b [SEG]",
                                   {"d0", "d1"}, {"d0", "d1"}, perfect);
    CHECK(img.iou_img == 1.0);
    EvalReport report = aggregate({img});
    CHECK(report.overall.giou == 1.0);
    CHECK(report.overall.ciou == 1.0);
    REQUIRE(report.few.has_value());
    CHECK_FALSE(report.many.has_value());
  }
  SUBCASE("one perfect and one missing prediction halves the per-image IoU") {
    // One prediction for two ground truths: P = 2 and IoUs are (1.0, 0.0).
    ImageEval img =
        evaluate_image({gt0}, {gt0, gt1}, "a [SEG]", {"d0", "d1"}, {"d0"}, perfect);
    CHECK(img.iou_img == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("a spurious empty prediction never raises gIoU") {
    ImageEval base = evaluate_image({gt0, gt1}, {gt0, gt1}, "a [SEG] b [SEG]",
                                    {"d0", "d1"}, {"d0", "d1"}, perfect);
    ImageEval padded =
        evaluate_image({gt0, gt1, BinaryMask::zeros(8, 8)}, {gt0, gt1},
                       "a [SEG] b [SEG] c [SEG]", {"d0", "d1"}, {"d0", "d1", "x"}, perfect);
    CHECK(padded.iou_img < base.iou_img);
  }
  SUBCASE("cumulative IoU matches a hand computation on two images") {
    // Image 1: inter 16, union 16. Image 2: half-overlap boxes
    BinaryMask a = box_mask(8, 8, 0, 0, 4, 4);   // 16 px
    BinaryMask b = box_mask(8, 8, 2, 0, 6, 4);   // 16 px, inter 8, union 24
    ImageEval img1 = evaluate_image({a}, {a}, "x [SEG]", {"d"}, {"d"}, perfect);
    ImageEval img2 = evaluate_image({b}, {a}, "x [SEG]", {"d"}, {"d"}, perfect);
    EvalReport report = aggregate({img1, img2});
    CHECK(report.overall.ciou == doctest::Approx((16.0 + 8.0) / (16.0 + 24.0)).epsilon(1e-15));
    CHECK(report.overall.giou ==
          doctest::Approx(0.5 * (1.0 + 8.0 / 24.0)).epsilon(1e-15));
  }
  SUBCASE("few/many split boundary: exactly three targets is few") {
    BinaryMask g2 = box_mask(8, 8, 0, 4, 4, 8);
    ImageEval three = evaluate_image({gt0, gt1, g2}, {gt0, gt1, g2},
                                     "a [SEG] b [SEG] c [SEG]", {"a", "b", "c"},
                                     {"a", "b", "c"}, perfect);
    BinaryMask g3 = box_mask(8, 8, 4, 0, 8, 4);
    ImageEval four = evaluate_image({gt0, gt1, g2, g3}, {gt0, gt1, g2, g3},
                                    "a [SEG] b [SEG] c [SEG] d [SEG]", {"a", "b", "c", "d"},
                                    {"a", "b", "c", "d"}, perfect);
    EvalReport report = aggregate({three, four});
    REQUIRE(report.few.has_value());
    REQUIRE(report.many.has_value());
    CHECK(report.few->num_images == 1);
    CHECK(report.many->num_images == 1);
  }
  SUBCASE("evaluation is invariant under prediction permutation") {
    StubScorer exact(StubMode::kExact);
    BinaryMask g2 = box_mask(8, 8, 0, 4, 4, 8);
    ImageEval fwd = evaluate_image({gt0, gt1, g2}, {gt0, gt1, g2},
                                   "a [SEG] b [SEG] c [SEG]", {"a", "b", "c"},
                                   {"a", "b", "c"}, exact);
    ImageEval rev = evaluate_image({g2, gt0, gt1}, {gt0, gt1, g2},
                                   "a [SEG] b [SEG] c [SEG]", {"a", "b", "c"},
                                   {"c", "a", "b"}, exact);
    CHECK(fwd.iou_img == rev.iou_img);
  }
  SUBCASE("soft product mode multiplies instead of gating") {
    StubScorer s7(StubMode::kConstant, 7);
    EvalOptions soft{true};
    ImageEval img = evaluate_image({gt0}, {gt0}, "x [SEG]", {"d"}, {"d"}, s7, soft);
    CHECK(img.iou_img == doctest::Approx(0.7).epsilon(1e-15));
    ImageEval hard = evaluate_image({gt0}, {gt0}, "x [SEG]", {"d"}, {"d"}, s7);
    CHECK(hard.iou_img == 1.0);
  }
  SUBCASE("bounds hold on random instances") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<BinaryMask> preds, gts;
      const std::size_t k = 1 + rng() % 4, g = 1 + rng() % 4;
      for (std::size_t i = 0; i < k; ++i) {
        BinaryMask m = BinaryMask::zeros(6, 6);
        for (auto& v : m.data) v = rng() % 2;
        preds.push_back(m);
      }
      std::string answer;
      for (std::size_t i = 0; i < k; ++i) answer += "[SEG] ";
      std::vector<std::string> gt_desc, pred_desc(k, "p");
      for (std::size_t i = 0; i < g; ++i) {
        BinaryMask m = BinaryMask::zeros(6, 6);
        for (auto& v : m.data) v = rng() % 2;
        gts.push_back(m);
        gt_desc.push_back("g");
      }
      ImageEval img = evaluate_image(preds, gts, answer, gt_desc, pred_desc, perfect);
      EvalReport report = aggregate({img});
      CHECK(report.overall.giou >= 0.0);
      CHECK(report.overall.giou <= 1.0);
      CHECK(report.overall.ciou >= 0.0);
      CHECK(report.overall.ciou <= 1.0);
    }
  }
}

TEST_CASE("aggregate rejects an empty image set") {
  CHECK_THROWS_AS(aggregate({}), ContractError);
}
