#include "pixelseg/evalrun.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "pixelseg/error.hpp"
#include "pixelseg/train.hpp"

namespace pixelseg {

using ordered_json = nlohmann::ordered_json;

namespace {

std::unique_ptr<Scorer> make_scorer(const EvalRunOptions& options) {
  if (options.scorer_mode == "remote") {
    if (options.scorer_endpoint.empty()) {
      throw ConfigError("eval: remote scorer requires an endpoint");
    }
    return std::make_unique<RemoteScorer>(options.scorer_endpoint, options.scorer_timeout_ms);
  }
  return make_stub_scorer(options.scorer_mode, options.stub_constant);
}

ImageEval eval_one_scene(const SegModel& model, const SyntheticScene& scene, Scorer& scorer,
                         const EvalRunOptions& options) {
  std::vector<std::string> descriptions;
  for (const SceneTarget& t : scene.targets) descriptions.push_back(t.description);

  std::vector<BinaryMask> preds;
  std::vector<BinaryMask> gts;
  if (options.use_gt_masks) {
    for (const SceneTarget& t : scene.targets) {
      preds.push_back(t.mask);
      gts.push_back(t.mask);
    }
  } else {
    preds = predict_masks(model, scene);
    for (const Tensor& gt : scene_gt_masks(scene, preds[0].height, preds[0].width)) {
      gts.push_back(binarize(gt, 0.5));
    }
  }
  EvalOptions eval_options{options.soft_product};
  return evaluate_image(preds, gts, scene.answer, descriptions, descriptions, scorer,
                        eval_options);
}

}  // namespace

EvalReport run_scene_eval(const SegModel& model, const std::vector<SyntheticScene>& scenes,
                          const EvalRunOptions& options) {
  if (scenes.empty()) throw ContractError("run_scene_eval: no scenes");
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  std::vector<ImageEval> images(scenes.size());

  if (workers == 1) {
    std::unique_ptr<Scorer> scorer = make_scorer(options);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      images[i] = eval_one_scene(model, scenes[i], *scorer, options);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
      std::unique_ptr<Scorer> scorer = make_scorer(options);
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= scenes.size()) return;
        try {
          images[i] = eval_one_scene(model, scenes[i], *scorer, options);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next.store(scenes.size());
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return aggregate(images);
}

std::string eval_report_to_json(const EvalReport& report, const std::string& metadata_json) {
  ordered_json j;
  ordered_json metadata = ordered_json::parse(metadata_json, nullptr, false);
  j["metadata"] = metadata.is_discarded() ? ordered_json::object() : metadata;

  auto split_json = [](const SplitMetrics& m) {
    ordered_json s;
    s["num_images"] = m.num_images;
    s["giou"] = m.giou;
    s["ciou"] = m.ciou;
    return s;
  };
  ordered_json splits;
  if (report.few) splits["few"] = split_json(*report.few);
  if (report.many) splits["many"] = split_json(*report.many);
  splits["overall"] = split_json(report.overall);
  j["splits"] = std::move(splits);

  ordered_json per_image = ordered_json::array();
  for (std::size_t i = 0; i < report.per_image.size(); ++i) {
    const ImageEval& img = report.per_image[i];
    ordered_json ij;
    ij["index"] = i;
    ij["targets"] = img.num_targets;
    ij["split"] = img.num_targets <= 3 ? "few" : "many";
    ij["iou_img"] = img.iou_img;
    ordered_json slots = ordered_json::array();
    for (const SlotResult& slot : img.slots) {
      ordered_json sj;
      sj["gt"] = slot.pad_gt ? ordered_json(nullptr) : ordered_json(slot.gt_index);
      sj["pred"] = slot.pad_pred ? ordered_json(nullptr) : ordered_json(slot.pred_index);
      sj["score"] = slot.score;
      sj["iou"] = slot.iou;
      slots.push_back(std::move(sj));
    }
    ij["slots"] = std::move(slots);
    per_image.push_back(std::move(ij));
  }
  j["per_image"] = std::move(per_image);
  return j.dump(2);
}

}  // namespace pixelseg
