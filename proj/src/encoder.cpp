#include "pixelseg/encoder.hpp"

#include <cmath>

#include "pixelseg/error.hpp"
#include "pixelseg/ops.hpp"

namespace pixelseg {

namespace {

double kaiming_stddev(std::size_t fan_in) {
  return std::sqrt(2.0 / static_cast<double>(fan_in));
}

}  // namespace

ToyEncoder::ToyEncoder(const EncoderConfig& config, std::mt19937_64& rng) : config_(config) {
  if (config.strides.empty()) throw ConfigError("encoder: at least one stride level required");
  std::size_t prev = 1;
  for (std::size_t s : config.strides) {
    if (s == 0 || s % prev != 0) {
      throw ConfigError("encoder: strides must be non-decreasing and each divisible by the previous");
    }
    stage_factors_.push_back(s / prev);
    prev = s;
  }
  std::size_t in = config.in_channels;
  const std::size_t w = config.trunk_width;
  for (std::size_t factor : stage_factors_) {
    const std::size_t fan_in = in * factor * factor;
    stage_w_.push_back(Tensor::randn({w, in, factor, factor}, rng, kaiming_stddev(fan_in), true));
    stage_b_.push_back(Tensor::zeros({w}, true));
    refine_w_.push_back(Tensor::randn({w, w, 1, 1}, rng, kaiming_stddev(w), true));
    refine_b_.push_back(Tensor::zeros({w}, true));
    tap_w_.push_back(Tensor::randn({config.enc_dim, w, 1, 1}, rng, kaiming_stddev(w), true));
    tap_b_.push_back(Tensor::zeros({config.enc_dim}, true));
    proj_w_.push_back(
        Tensor::randn({config.dec_dim, config.enc_dim, 1, 1}, rng, kaiming_stddev(config.enc_dim), true));
    proj_b_.push_back(Tensor::zeros({config.dec_dim}, true));
    in = w;
  }
}

MultiScaleFeatures ToyEncoder::encode_multiscale(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != config_.in_channels) {
    throw DimensionError("encode_multiscale: expected (" + std::to_string(config_.in_channels) +
                         ",H,W), got " + shape_str(image.shape()));
  }
  const std::size_t deepest = config_.strides.back();
  if (image.dim(1) % deepest != 0 || image.dim(2) % deepest != 0) {
    throw DimensionError("encode_multiscale: spatial size " + std::to_string(image.dim(1)) + "x" +
                         std::to_string(image.dim(2)) + " not divisible by stride " +
                         std::to_string(deepest));
  }
  MultiScaleFeatures out;
  Tensor trunk = image;
  for (std::size_t l = 0; l < stage_factors_.size(); ++l) {
    trunk = gelu(conv2d(trunk, stage_w_[l], stage_b_[l], stage_factors_[l]));
    trunk = gelu(conv2d(trunk, refine_w_[l], refine_b_[l], 1));
    out.levels.push_back(conv2d(trunk, tap_w_[l], tap_b_[l], 1));
  }
  return out;
}

MultiScaleFeatures ToyEncoder::project_to_decoder(const MultiScaleFeatures& features) const {
  if (features.levels.size() != num_levels()) {
    throw DimensionError("project_to_decoder: expected " + std::to_string(num_levels()) +
                         " levels, got " + std::to_string(features.levels.size()));
  }
  MultiScaleFeatures out;
  for (std::size_t l = 0; l < features.levels.size(); ++l) {
    const Tensor& f = features.levels[l];
    if (f.rank() != 3 || f.dim(0) != config_.enc_dim) {
      throw DimensionError("project_to_decoder: level " + std::to_string(l) + " width " +
                           std::to_string(f.dim(0)) + " != " + std::to_string(config_.enc_dim));
    }
    out.levels.push_back(conv2d(f, proj_w_[l], proj_b_[l], 1));
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> ToyEncoder::params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t l = 0; l < stage_w_.size(); ++l) {
    const std::string p = "encoder.stage" + std::to_string(l);
    out.emplace_back(p + ".patch.weight", stage_w_[l]);
    out.emplace_back(p + ".patch.bias", stage_b_[l]);
    out.emplace_back(p + ".refine.weight", refine_w_[l]);
    out.emplace_back(p + ".refine.bias", refine_b_[l]);
    out.emplace_back(p + ".tap.weight", tap_w_[l]);
    out.emplace_back(p + ".tap.bias", tap_b_[l]);
    out.emplace_back(p + ".proj.weight", proj_w_[l]);
    out.emplace_back(p + ".proj.bias", proj_b_[l]);
  }
  return out;
}

TargetEmbedder::TargetEmbedder(const EmbedderConfig& config, const CodebookConfig& codebook,
                               std::mt19937_64& rng)
    : config_(config), codebook_config_(codebook) {
  const std::size_t in = config.attr_dim + codebook.dim;
  const std::size_t out = codebook.scales * codebook.tokens_per_group * codebook.dim;
  w1_ = Tensor::randn({config.hidden, in}, rng, std::sqrt(2.0 / static_cast<double>(in + config.hidden)), true);
  b1_ = Tensor::zeros({config.hidden}, true);
  w2_ = Tensor::randn({out, config.hidden}, rng, std::sqrt(2.0 / static_cast<double>(config.hidden + out)), true);
  b2_ = Tensor::zeros({out}, true);
}

std::vector<std::vector<Tensor>> TargetEmbedder::embed_targets(
    const std::vector<TargetSpec>& specs, const Tensor& global_feature,
    const SegCodebook& codebook) const {
  if (specs.empty()) throw ContractError("embed_targets: at least one target required");
  if (global_feature.rank() != 2 || global_feature.dim(0) != 1 ||
      global_feature.dim(1) != codebook_config_.dim) {
    throw DimensionError("embed_targets: global feature must be (1," +
                         std::to_string(codebook_config_.dim) + ")");
  }
  const std::size_t L = codebook_config_.scales;
  const std::size_t n_cb = codebook_config_.tokens_per_group;
  const std::size_t d = codebook_config_.dim;

  std::vector<std::vector<Tensor>> out;
  out.reserve(specs.size());
  for (const TargetSpec& spec : specs) {
    if (spec.attributes.size() != config_.attr_dim) {
      throw DimensionError("embed_targets: attribute vector width " +
                           std::to_string(spec.attributes.size()) + " != " +
                           std::to_string(config_.attr_dim));
    }
    Tensor attrs = Tensor::from_data({1, config_.attr_dim}, spec.attributes);
    Tensor in = concat({attrs, global_feature}, 1);
    Tensor offsets = linear(gelu(linear(in, w1_, b1_)), w2_, b2_);
    Tensor grid = reshape(offsets, {L * n_cb, d});
    std::vector<Tensor> per_scale;
    per_scale.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
      Tensor group_offsets = slice_rows(grid, l * n_cb, n_cb);
      per_scale.push_back(add(codebook.group_tokens(l), group_offsets));
    }
    out.push_back(std::move(per_scale));
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> TargetEmbedder::params() const {
  return {{"embedder.fc1.weight", w1_},
          {"embedder.fc1.bias", b1_},
          {"embedder.fc2.weight", w2_},
          {"embedder.fc2.bias", b2_}};
}

}  // namespace pixelseg
