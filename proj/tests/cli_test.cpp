#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "pixelseg/convert.hpp"
#include "pixelseg/records.hpp"
#include "pixelseg/rle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

std::string cli_binary() {
  const char* bin = std::getenv("PIXELSEG_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "PIXELSEG_BIN must point at the CLI binary");
  return bin;
}

CliResult run_cli(const std::string& args) {
  const std::string command = cli_binary() + " " + args + " 2>&1";
  std::array<char, 4096> buffer{};
  CliResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::size_t n = fread(buffer.data(), 1, buffer.size(), pipe)) {
    result.output.append(buffer.data(), n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "pixelseg_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string tiny_config_path() {
  const fs::path path = work_dir() / "tiny_config.json";
  std::ofstream out(path, std::ios::trunc);
  out << R"({
  "seed": 5,
  "model": {"dim": 8, "enc_dim": 8, "trunk_width": 8, "strides": [4, 8],
            "tokens_per_group": 2, "out_tokens": 1, "mlp_width": 16, "image_size": 32},
  "optimizer": {"batch_size": 2, "grad_accum_steps": 1, "total_steps": 40,
                "warmup_steps": 4, "learning_rate": 0.001},
  "data": {"image_size": 32, "min_targets": 1, "max_targets": 2,
           "min_extent": 8, "max_extent": 16, "train_scenes": 12, "eval_scenes": 6}
})";
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool directories_identical(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) names_b.push_back(e.path().filename().string());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b) return false;
  for (const std::string& name : names_a) {
    if (slurp(a / name) != slurp(b / name)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("bad invocations exit with the documented codes") {
  CHECK(run_cli("train-toy --config /nonexistent.json").exit_code == 2);
  const fs::path bad = work_dir() / "bad_config.json";
  std::ofstream(bad) << "{\"bogus\": true}";
  CHECK(run_cli("train-toy --config " + bad.string()).exit_code == 2);

  const fs::path garbage = work_dir() / "garbage.jsonl";
  std::ofstream(garbage) << "this is not json\n";
  CHECK(run_cli("stats --input " + garbage.string()).exit_code == 4);
}

TEST_CASE("training writes a checkpoint, echoes overrides and is reproducible") {
  const std::string config = tiny_config_path();
  const fs::path out_a = work_dir() / "run_a";
  const fs::path out_b = work_dir() / "run_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);

  CliResult a = run_cli("train-toy --config " + config + " --lambda-ref 0 --out " + out_a.string());
  INFO(a.output);
  REQUIRE(a.exit_code == 0);
  CHECK(fs::exists(out_a / "checkpoint" / "manifest.json"));

  const std::string log = slurp(out_a / "train_log.txt");
  CHECK(log.find("\"lambda_ref\": 0.0") != std::string::npos);
  CHECK(log.find("step 1 ") != std::string::npos);
  CHECK(log.find("step 40 ") != std::string::npos);

  CliResult b = run_cli("train-toy --config " + config + " --lambda-ref 0 --out " + out_b.string());
  REQUIRE(b.exit_code == 0);
  CHECK(directories_identical(out_a / "checkpoint", out_b / "checkpoint"));
  CHECK(slurp(out_a / "train_log.txt") == slurp(out_b / "train_log.txt"));
}

TEST_CASE("eval self-check scores a perfect one") {
  const std::string config = tiny_config_path();
  const fs::path report_path = work_dir() / "report.json";
  CliResult r = run_cli("eval --config " + config + " --use-gt-masks --scorer-mode stub-exact --out " +
                        report_path.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  json report = json::parse(slurp(report_path));
  CHECK(report["splits"]["overall"]["giou"] == 1.0);
  CHECK(report["splits"]["overall"]["ciou"] == 1.0);
  CHECK(report["metadata"]["soft_product"] == false);
  CHECK(report["metadata"]["use_gt_masks"] == true);

  CliResult soft = run_cli("eval --config " + config +
                           " --use-gt-masks --soft-product --workers 3 --out " +
                           report_path.string());
  REQUIRE(soft.exit_code == 0);
  json soft_report = json::parse(slurp(report_path));
  CHECK(soft_report["metadata"]["soft_product"] == true);
  CHECK(soft_report["metadata"]["workers"] == 3);
}

TEST_CASE("eval on a trained checkpoint produces a complete report") {
  const std::string config = tiny_config_path();
  const fs::path run = work_dir() / "run_eval";
  fs::remove_all(run);
  REQUIRE(run_cli("train-toy --config " + config + " --out " + run.string()).exit_code == 0);
  const fs::path report_path = work_dir() / "trained_report.json";
  CliResult r = run_cli("eval --checkpoint " + (run / "checkpoint").string() +
                        " --scorer-mode stub-const --out " + report_path.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  json report = json::parse(slurp(report_path));
  CHECK(report["per_image"].size() == 6);
  CHECK(report["splits"].contains("overall"));
  CHECK(report["metadata"]["config"]["seed"] == 5);
}

TEST_CASE("unreachable remote scorer exits with the external-service code") {
  const std::string config = tiny_config_path();
  CliResult r = run_cli("eval --config " + config +
                        " --use-gt-masks --scorer-mode remote"
                        " --scorer-endpoint http://127.0.0.1:9/score --scorer-timeout 300");
  CHECK(r.exit_code == 3);
}

TEST_CASE("convert is idempotent and stats reproduce hand counts") {
  using namespace pixelseg;
  // Fixture: 10 images with two instances each.
  std::vector<ImageAnnotation> annotations;
  for (int i = 0; i < 10; ++i) {
    ImageAnnotation ann;
    ann.image = "img" + std::to_string(i) + ".png";
    ann.height = 4;
    ann.width = 4;
    for (int j = 0; j < 2; ++j) {
      InstanceAnnotation inst;
      inst.description = "a shape numbered " + std::to_string(i) + "-" + std::to_string(j);
      inst.category = j == 0 ? "rectangle" : "ellipse";
      BinaryMask m = BinaryMask::zeros(4, 4);
      m.at(j, (i + j) % 4) = 1;
      inst.rle_counts = rle_encode(m).counts;
      ann.instances.push_back(std::move(inst));
    }
    annotations.push_back(std::move(ann));
  }
  const fs::path ann_path = work_dir() / "annotations.jsonl";
  save_annotations(annotations, ann_path.string());

  const fs::path rec1 = work_dir() / "records1.jsonl";
  const fs::path rec2 = work_dir() / "records2.jsonl";
  REQUIRE(run_cli("convert --input " + ann_path.string() + " --out " + rec1.string() +
                  " --k-min 2 --k-max 2 --seed 9").exit_code == 0);
  REQUIRE(run_cli("convert --input " + ann_path.string() + " --out " + rec2.string() +
                  " --k-min 2 --k-max 2 --seed 9").exit_code == 0);
  CHECK(slurp(rec1) == slurp(rec2));

  const fs::path stats_path = work_dir() / "stats.json";
  const fs::path hist_path = work_dir() / "hist.txt";
  REQUIRE(run_cli("stats --input " + rec1.string() + " --out " + stats_path.string() +
                  " --histograms " + hist_path.string()).exit_code == 0);
  json stats = json::parse(slurp(stats_path));
  CHECK(stats["num_records"] == 10);
  CHECK(stats["targets"]["mean"] == 2.0);
  CHECK(stats["targets"]["max"] == 2);
  CHECK(stats["targets"]["histogram"]["2"] == 10);
  CHECK(stats["description_tokens"]["histogram"]["4"] == 20);  // "a shape numbered i-j"
  CHECK(stats["categories"]["histogram"]["rectangle"] == 10);
  CHECK(slurp(hist_path).find("# targets per question") != std::string::npos);
}

TEST_CASE("flops estimate is printed with its breakdown") {
  const std::string config = tiny_config_path();
  CliResult r = run_cli("flops --config " + config + " --targets 3");
  REQUIRE(r.exit_code == 0);
  json j = json::parse(r.output);
  CHECK(j["targets"] == 3);
  CHECK(j["total_muladds"].get<std::uint64_t>() > 0);
  std::uint64_t sum = 0;
  for (const auto& [key, value] : j["breakdown"].items()) sum += value.get<std::uint64_t>();
  CHECK(sum == j["total_muladds"].get<std::uint64_t>());

  CliResult zero = run_cli("flops --config " + config + " --targets 0");
  REQUIRE(zero.exit_code == 0);
  CHECK(json::parse(zero.output)["total_muladds"] == 0);
}

TEST_CASE("gen writes records and images") {
  const std::string config = tiny_config_path();
  const fs::path out = work_dir() / "dataset";
  fs::remove_all(out);
  CliResult r = run_cli("gen --config " + config + " --count 4 --out " + out.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(out / "records.jsonl"));
  CHECK(fs::exists(out / "scene_00000.png"));
  CHECK(pixelseg::load_records((out / "records.jsonl").string()).size() == 4);
}
