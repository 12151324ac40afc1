#pragma once

#include <string>

#include "pixelseg/model.hpp"
#include "pixelseg/synthetic.hpp"
#include "pixelseg/train.hpp"

namespace pixelseg {

// Everything a run needs, with the published training settings as defaults.
// JSON parsing is strict: unknown keys are rejected up front.
struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  SyntheticConfig data;
  std::size_t train_scenes = 2000;
  std::size_t eval_scenes = 200;

  void validate() const;
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

// Seeds for the independent random streams of one run.
std::uint64_t train_data_seed(const RunConfig& config);
std::uint64_t eval_data_seed(const RunConfig& config);
std::uint64_t model_seed(const RunConfig& config);

}  // namespace pixelseg
