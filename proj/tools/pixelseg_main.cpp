#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pixelseg/checkpoint.hpp"
#include "pixelseg/config.hpp"
#include "pixelseg/convert.hpp"
#include "pixelseg/decoder.hpp"
#include "pixelseg/error.hpp"
#include "pixelseg/evalrun.hpp"
#include "pixelseg/png.hpp"
#include "pixelseg/records.hpp"
#include "pixelseg/train.hpp"

namespace fs = std::filesystem;
using namespace pixelseg;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitExternal = 3;
constexpr int kExitDataFormat = 4;

struct CommonFlags {
  std::string config_path;
  std::int64_t seed = -1;  // -1: keep the config's seed
};

RunConfig resolve_config(const CommonFlags& common) {
  RunConfig config =
      common.config_path.empty() ? default_run_config() : load_run_config(common.config_path);
  if (common.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(common.seed);
    config.train.seed = config.seed;
  }
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, CommonFlags& common) {
  cmd->add_option("--config", common.config_path, "Run configuration JSON file");
  cmd->add_option("--seed", common.seed, "Override the configured seed");
}

void write_text(const std::string& path, const std::string& text) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << text;
}

int cmd_gen(const CommonFlags& common, const std::string& out_dir, std::size_t count,
            bool write_images) {
  RunConfig config = resolve_config(common);
  if (count == 0) count = config.train_scenes;
  const std::vector<SyntheticScene> scenes =
      gen_synthetic(config.data, train_data_seed(config), count);
  fs::create_directories(out_dir);
  std::vector<MuseRecord> records;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05zu.png", i);
    records.push_back(scene_to_record(scenes[i], name));
    if (write_images) {
      write_png_rgb8((fs::path(out_dir) / name).string(), config.data.image_size,
                     config.data.image_size, scene_to_rgb8(scenes[i]));
    }
  }
  save_records(records, (fs::path(out_dir) / "records.jsonl").string());
  write_text((fs::path(out_dir) / "config.json").string(), run_config_to_json(config) + "\n");
  std::cout << "wrote " << records.size() << " records to " << out_dir << "\n";
  return kExitOk;
}

int cmd_train_toy(const CommonFlags& common, const std::string& out_dir, double lambda_ref,
                  double lambda_dice, double alpha, std::int64_t steps, std::int64_t batch) {
  RunConfig config = resolve_config(common);
  if (lambda_ref >= 0.0) config.train.loss.lambda_ref = lambda_ref;
  if (lambda_dice >= 0.0) config.train.loss.lambda_dice = lambda_dice;
  if (alpha >= 1.0) config.train.loss.alpha = alpha;
  if (steps > 0) {
    config.train.total_steps = static_cast<std::size_t>(steps);
    config.train.optim.total_steps = config.train.total_steps;
  }
  if (batch > 0) config.train.batch_size = static_cast<std::size_t>(batch);
  config.validate();

  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "train_log.txt").string();
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw FormatError("cannot open " + log_path + " for writing");
  const std::string echo = run_config_to_json(config);
  log << "# effective config\n" << echo << "\n# steps\n";

  const std::vector<SyntheticScene> train_scenes =
      gen_synthetic(config.data, train_data_seed(config), config.train_scenes);
  SegModel model(config.model, model_seed(config));
  const TrainResult result = train_toy(model, train_scenes, config.train, &log);

  save_checkpoint((fs::path(out_dir) / "checkpoint").string(), model.params(), echo);
  std::cout << "trained " << result.steps.size() << " steps, final loss " << result.final_loss
            << "\ncheckpoint: " << (fs::path(out_dir) / "checkpoint").string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonFlags& common, const std::string& checkpoint_dir,
             const std::string& out_path, EvalRunOptions options) {
  RunConfig config;
  std::string config_echo;
  std::unique_ptr<SegModel> model;
  if (!checkpoint_dir.empty()) {
    config_echo = read_checkpoint_config(checkpoint_dir);
    config = parse_run_config(config_echo);
    if (common.seed >= 0) config.seed = static_cast<std::uint64_t>(common.seed);
    model = std::make_unique<SegModel>(config.model, model_seed(config));
    auto params = model->params();
    load_checkpoint(checkpoint_dir, params);
  } else {
    if (!options.use_gt_masks) {
      throw ConfigError("eval: --checkpoint required unless --use-gt-masks is set");
    }
    config = resolve_config(common);
    config_echo = run_config_to_json(config);
    model = std::make_unique<SegModel>(config.model, model_seed(config));
  }

  const std::vector<SyntheticScene> scenes =
      gen_synthetic(config.data, eval_data_seed(config), config.eval_scenes);
  const EvalReport report = run_scene_eval(*model, scenes, options);

  ordered_json metadata;
  metadata["config"] = ordered_json::parse(config_echo, nullptr, false);
  metadata["checkpoint"] = checkpoint_dir;
  metadata["scorer_mode"] = options.scorer_mode;
  metadata["soft_product"] = options.soft_product;
  metadata["use_gt_masks"] = options.use_gt_masks;
  metadata["workers"] = options.workers;
  const std::string json = eval_report_to_json(report, metadata.dump());
  if (out_path.empty()) {
    std::cout << json << "\n";
  } else {
    write_text(out_path, json + "\n");
    std::cout << "overall gIoU " << report.overall.giou << " cIoU " << report.overall.ciou
              << "\nreport: " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_convert(const std::string& input, const std::string& out_path, std::size_t k_min,
                std::size_t k_max, std::uint64_t seed) {
  const std::vector<ImageAnnotation> annotations = load_annotations(input);
  auto [records, report] = convert_multi_referring(annotations, {k_min, k_max}, seed);
  save_records(records, out_path);
  std::cout << "converted " << report.converted << " images, skipped "
            << report.skipped_no_instances << " without instances\n";
  return kExitOk;
}

int cmd_stats(const std::string& input, const std::string& out_path,
              const std::string& histogram_path) {
  const std::vector<MuseRecord> records = load_records(input);
  const DatasetStatistics stats = compute_statistics(records);
  const std::string json = statistics_to_json(stats);
  if (out_path.empty()) {
    std::cout << json << "\n";
  } else {
    write_text(out_path, json + "\n");
  }
  if (!histogram_path.empty()) write_text(histogram_path, statistics_histogram_dump(stats));
  return kExitOk;
}

int cmd_flops(const CommonFlags& common, std::size_t targets) {
  RunConfig config = resolve_config(common);
  const DecoderConfig dc = config.model.decoder_config();
  const FlopsBreakdown fb = flops_breakdown(dc, targets);
  ordered_json j;
  j["targets"] = targets;
  j["total_muladds"] = fb.total();
  ordered_json parts;
  parts["self_attention"] = fb.self_attention;
  parts["cross_attention_token_side"] = fb.cross_attention_token_side;
  parts["cross_attention_feature_side"] = fb.cross_attention_feature_side;
  parts["token_mlps"] = fb.token_mlps;
  parts["feature_upscale"] = fb.feature_upscale;
  parts["mask_products"] = fb.mask_products;
  parts["modulation"] = fb.modulation;
  parts["mask_fusion"] = fb.mask_fusion;
  j["breakdown"] = std::move(parts);
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale multi-target mask generation and evaluation toolkit"};
  app.require_subcommand(1);

  CommonFlags gen_common, train_common, eval_common, flops_common;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic scene dataset");
  add_common(gen, gen_common);
  std::string gen_out = "dataset";
  std::size_t gen_count = 0;
  bool gen_images = true;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--count", gen_count, "Scene count (default: config train_scenes)");
  gen->add_flag("!--no-images", gen_images, "Skip PNG export");

  auto* train = app.add_subcommand("train-toy", "Train the toy model on synthetic scenes");
  add_common(train, train_common);
  std::string train_out = "runs/toy";
  double lambda_ref = -1.0, lambda_dice = -1.0, alpha = -1.0;
  std::int64_t steps = 0, batch = 0;
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--lambda-ref", lambda_ref, "Override the refinement loss weight");
  train->add_option("--lambda-dice", lambda_dice, "Override the dice loss weight");
  train->add_option("--alpha", alpha, "Override the overlap weight");
  train->add_option("--steps", steps, "Override the optimizer step count");
  train->add_option("--batch", batch, "Override the batch size");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out scenes");
  add_common(eval, eval_common);
  std::string eval_checkpoint, eval_out;
  EvalRunOptions eval_options;
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint directory");
  eval->add_option("--out", eval_out, "Report JSON path (stdout when omitted)");
  eval->add_option("--scorer-mode", eval_options.scorer_mode,
                   "stub-const|stub-exact|stub-jaccard|remote");
  eval->add_option("--scorer-endpoint", eval_options.scorer_endpoint,
                   "Remote scorer URL (or env SCORER_ENDPOINT)");
  eval->add_option("--scorer-timeout", eval_options.scorer_timeout_ms,
                   "Remote scorer timeout in milliseconds");
  eval->add_option("--stub-constant", eval_options.stub_constant,
                   "Raw score used by the constant stub");
  eval->add_option("--workers", eval_options.workers, "Parallel evaluation workers");
  eval->add_flag("--soft-product", eval_options.soft_product,
                 "Multiply IoU by the score instead of hard gating");
  eval->add_flag("--use-gt-masks", eval_options.use_gt_masks,
                 "Self-check: evaluate ground-truth masks as predictions");

  auto* convert = app.add_subcommand("convert", "Build multi-referring records from annotations");
  std::string conv_in, conv_out = "records.jsonl";
  std::size_t k_min = 1, k_max = 3;
  std::uint64_t conv_seed = 0;
  convert->add_option("--input", conv_in, "Instance annotation JSONL")->required();
  convert->add_option("--out", conv_out, "Output records JSONL");
  convert->add_option("--k-min", k_min, "Minimum targets per question");
  convert->add_option("--k-max", k_max, "Maximum targets per question");
  convert->add_option("--seed", conv_seed, "Sampling seed");

  auto* stats = app.add_subcommand("stats", "Dataset statistics for a records file");
  std::string stats_in, stats_out, stats_hist;
  stats->add_option("--input", stats_in, "Records JSONL")->required();
  stats->add_option("--out", stats_out, "Statistics JSON path (stdout when omitted)");
  stats->add_option("--histograms", stats_hist, "gnuplot-compatible histogram dump");

  auto* flops = app.add_subcommand("flops", "Closed-form decoder cost estimate");
  add_common(flops, flops_common);
  std::size_t flops_targets = 1;
  flops->add_option("--targets", flops_targets, "Targets per image");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_common, gen_out, gen_count, gen_images);
    if (train->parsed()) {
      return cmd_train_toy(train_common, train_out, lambda_ref, lambda_dice, alpha, steps, batch);
    }
    if (eval->parsed()) {
      if (eval_options.scorer_endpoint.empty()) {
        if (const char* env = std::getenv("SCORER_ENDPOINT")) eval_options.scorer_endpoint = env;
      }
      return cmd_eval(eval_common, eval_checkpoint, eval_out, eval_options);
    }
    if (convert->parsed()) return cmd_convert(conv_in, conv_out, k_min, k_max, conv_seed);
    if (stats->parsed()) return cmd_stats(stats_in, stats_out, stats_hist);
    if (flops->parsed()) return cmd_flops(flops_common, flops_targets);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitExternal;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitExternal;
  } catch (const FormatError& e) {
    std::cerr << "data format error: " << e.what() << "\n";
    return kExitDataFormat;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
