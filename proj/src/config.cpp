#include "pixelseg/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pixelseg/error.hpp"

namespace pixelseg {

using ordered_json = nlohmann::ordered_json;

namespace {

void check_keys(const ordered_json& j, const std::string& context,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key \"" + key + "\" in " + context);
    }
  }
}

template <typename T>
void read(const ordered_json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const ordered_json::exception&) {
    throw ConfigError("config: bad value for \"" + std::string(key) + "\"");
  }
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (data.image_size != model.image_size) {
    throw ConfigError("config: data.image_size must equal model.image_size");
  }
  if (train.loss.alpha < 1.0) throw ConfigError("config: loss.alpha must be >= 1");
  if (train.loss.lambda_ref < 0.0 || train.loss.lambda_dice < 0.0) {
    throw ConfigError("config: loss weights must be non-negative");
  }
  if (train.batch_size == 0 || train.grad_accum_steps == 0 || train.total_steps == 0) {
    throw ConfigError("config: batch size, accumulation and steps must be positive");
  }
  if (train.optim.learning_rate <= 0.0) throw ConfigError("config: learning rate must be positive");
  if (train.optim.warmup_steps >= train.total_steps) {
    throw ConfigError("config: warmup must end before total_steps");
  }
  if (train_scenes == 0 || eval_scenes == 0) {
    throw ConfigError("config: train_scenes and eval_scenes must be positive");
  }
  if (model.embedder.attr_dim != kAttributeDim) {
    throw ConfigError("config: attr_dim must be " + std::to_string(kAttributeDim) +
                      " for the synthetic attribute layout");
  }
  if (data.min_targets == 0 || data.min_targets > data.max_targets) {
    throw ConfigError("config: invalid target count range");
  }
}

RunConfig default_run_config() {
  RunConfig c;
  c.train.total_steps = 2000;
  c.train.optim.total_steps = 2000;
  return c;
}

RunConfig parse_run_config(const std::string& json_text) {
  ordered_json j = ordered_json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config: not a JSON object");
  check_keys(j, "top level", {"seed", "model", "loss", "optimizer", "data"});

  RunConfig c = default_run_config();
  read(j, "seed", c.seed);
  c.train.seed = c.seed;

  if (j.contains("model")) {
    const ordered_json& m = j["model"];
    check_keys(m, "model",
               {"dim", "enc_dim", "trunk_width", "strides", "tokens_per_group", "out_tokens",
                "mlp_width", "attr_dim", "embedder_hidden", "image_size"});
    read(m, "dim", c.model.encoder.dec_dim);
    read(m, "enc_dim", c.model.encoder.enc_dim);
    read(m, "trunk_width", c.model.encoder.trunk_width);
    read(m, "strides", c.model.encoder.strides);
    read(m, "tokens_per_group", c.model.codebook.tokens_per_group);
    read(m, "out_tokens", c.model.out_tokens);
    read(m, "mlp_width", c.model.mlp_width);
    read(m, "attr_dim", c.model.embedder.attr_dim);
    read(m, "embedder_hidden", c.model.embedder.hidden);
    read(m, "image_size", c.model.image_size);
  }
  c.model.codebook.scales = c.model.encoder.strides.size();
  c.model.codebook.dim = c.model.encoder.dec_dim;

  if (j.contains("loss")) {
    const ordered_json& l = j["loss"];
    check_keys(l, "loss", {"alpha", "lambda_ref", "lambda_dice"});
    read(l, "alpha", c.train.loss.alpha);
    read(l, "lambda_ref", c.train.loss.lambda_ref);
    read(l, "lambda_dice", c.train.loss.lambda_dice);
  }
  if (j.contains("optimizer")) {
    const ordered_json& o = j["optimizer"];
    check_keys(o, "optimizer",
               {"learning_rate", "weight_decay", "beta1", "beta2", "batch_size", "warmup_steps",
                "grad_accum_steps", "total_steps"});
    read(o, "learning_rate", c.train.optim.learning_rate);
    read(o, "weight_decay", c.train.optim.weight_decay);
    read(o, "beta1", c.train.optim.beta1);
    read(o, "beta2", c.train.optim.beta2);
    read(o, "batch_size", c.train.batch_size);
    read(o, "warmup_steps", c.train.optim.warmup_steps);
    read(o, "grad_accum_steps", c.train.grad_accum_steps);
    read(o, "total_steps", c.train.total_steps);
    c.train.optim.total_steps = c.train.total_steps;
  }
  if (j.contains("data")) {
    const ordered_json& d = j["data"];
    check_keys(d, "data",
               {"image_size", "min_targets", "max_targets", "min_extent", "max_extent",
                "max_overlap", "train_scenes", "eval_scenes"});
    read(d, "image_size", c.data.image_size);
    read(d, "min_targets", c.data.min_targets);
    read(d, "max_targets", c.data.max_targets);
    read(d, "min_extent", c.data.min_extent);
    read(d, "max_extent", c.data.max_extent);
    read(d, "max_overlap", c.data.max_overlap);
    read(d, "train_scenes", c.train_scenes);
    read(d, "eval_scenes", c.eval_scenes);
  } else {
    c.data.image_size = c.model.image_size;
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string run_config_to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  ordered_json m;
  m["dim"] = c.model.encoder.dec_dim;
  m["enc_dim"] = c.model.encoder.enc_dim;
  m["trunk_width"] = c.model.encoder.trunk_width;
  m["strides"] = c.model.encoder.strides;
  m["tokens_per_group"] = c.model.codebook.tokens_per_group;
  m["out_tokens"] = c.model.out_tokens;
  m["mlp_width"] = c.model.mlp_width;
  m["attr_dim"] = c.model.embedder.attr_dim;
  m["embedder_hidden"] = c.model.embedder.hidden;
  m["image_size"] = c.model.image_size;
  j["model"] = std::move(m);
  ordered_json l;
  l["alpha"] = c.train.loss.alpha;
  l["lambda_ref"] = c.train.loss.lambda_ref;
  l["lambda_dice"] = c.train.loss.lambda_dice;
  j["loss"] = std::move(l);
  ordered_json o;
  o["learning_rate"] = c.train.optim.learning_rate;
  o["weight_decay"] = c.train.optim.weight_decay;
  o["beta1"] = c.train.optim.beta1;
  o["beta2"] = c.train.optim.beta2;
  o["batch_size"] = c.train.batch_size;
  o["warmup_steps"] = c.train.optim.warmup_steps;
  o["grad_accum_steps"] = c.train.grad_accum_steps;
  o["total_steps"] = c.train.total_steps;
  j["optimizer"] = std::move(o);
  ordered_json d;
  d["image_size"] = c.data.image_size;
  d["min_targets"] = c.data.min_targets;
  d["max_targets"] = c.data.max_targets;
  d["min_extent"] = c.data.min_extent;
  d["max_extent"] = c.data.max_extent;
  d["max_overlap"] = c.data.max_overlap;
  d["train_scenes"] = c.train_scenes;
  d["eval_scenes"] = c.eval_scenes;
  j["data"] = std::move(d);
  return j.dump(2);
}

std::uint64_t train_data_seed(const RunConfig& config) { return config.seed * 1000003 + 1; }
std::uint64_t eval_data_seed(const RunConfig& config) { return config.seed * 1000003 + 2; }
std::uint64_t model_seed(const RunConfig& config) { return config.seed * 1000003 + 3; }

}  // namespace pixelseg
