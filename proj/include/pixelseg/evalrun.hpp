#pragma once

#include <string>

#include "pixelseg/eval.hpp"
#include "pixelseg/model.hpp"
#include "pixelseg/synthetic.hpp"

namespace pixelseg {

struct EvalRunOptions {
  std::size_t workers = 1;
  bool soft_product = false;
  bool use_gt_masks = false;  // substitute ground truths for predictions (self-check)
  std::string scorer_mode = "stub-exact";
  std::string scorer_endpoint;
  int scorer_timeout_ms = 5000;
  int stub_constant = 10;
};

// Evaluates the model over every scene: predict, match, splice, score, gate,
// aggregate. Per-image work fans out to `workers` threads; scorer instances
// are per-worker so remote calls stay naturally bounded.
EvalReport run_scene_eval(const SegModel& model, const std::vector<SyntheticScene>& scenes,
                          const EvalRunOptions& options);

// Report JSON with stable key order; metadata_json is embedded verbatim
// under "metadata" (pass "{}" for none).
std::string eval_report_to_json(const EvalReport& report, const std::string& metadata_json);

}  // namespace pixelseg
