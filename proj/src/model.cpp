#include "pixelseg/model.hpp"

#include "pixelseg/error.hpp"
#include "pixelseg/ops.hpp"

namespace pixelseg {

DecoderConfig ModelConfig::decoder_config() const {
  DecoderConfig dc;
  dc.scales = scales();
  dc.dim = encoder.dec_dim;
  dc.out_tokens = out_tokens;
  dc.mlp_width = mlp_width;
  dc.upscale = upscale;
  for (std::size_t s : encoder.strides) {
    dc.level_sizes.emplace_back(image_size / s, image_size / s);
  }
  return dc;
}

void ModelConfig::validate() const {
  if (encoder.strides.empty()) throw ConfigError("model: no scale levels configured");
  if (codebook.scales != scales()) {
    throw ConfigError("model: codebook scales must match the stride schedule length");
  }
  if (codebook.dim != encoder.dec_dim) {
    throw ConfigError("model: codebook dim must match the decoder width");
  }
  if (image_size == 0 || image_size % encoder.strides.back() != 0) {
    throw ConfigError("model: image size must be divisible by the deepest stride");
  }
  if (encoder.dec_dim % 2 != 0) throw ConfigError("model: decoder width must be even");
}

SegModel::SegModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  std::mt19937_64 rng(seed);
  encoder_ = std::make_unique<ToyEncoder>(config.encoder, rng);
  codebook_ = std::make_unique<SegCodebook>(config.codebook, rng);
  embedder_ = std::make_unique<TargetEmbedder>(config.embedder, config.codebook, rng);
  decoder_ = std::make_unique<PixelDecoder>(config.decoder_config(), rng);
}

std::vector<MaskLogits> SegModel::forward(const Tensor& image,
                                          const std::vector<TargetSpec>& specs) const {
  MultiScaleFeatures features = encoder_->project_to_decoder(encoder_->encode_multiscale(image));
  const Tensor& deepest = features.levels.back();
  Tensor global = reshape(mean_axis(chw_to_mat(deepest), 0), {1, config_.encoder.dec_dim});

  const std::vector<std::vector<Tensor>> hiddens =
      embedder_->embed_targets(specs, global, *codebook_);
  std::vector<std::vector<Tensor>> fused;
  fused.reserve(hiddens.size());
  for (const std::vector<Tensor>& per_scale : hiddens) {
    std::vector<Tensor> f;
    f.reserve(per_scale.size());
    for (const Tensor& group : per_scale) f.push_back(codebook_->fuse_tokens(group));
    fused.push_back(std::move(f));
  }
  return decoder_->decode(fused, features);
}

std::vector<std::pair<std::string, Tensor>> SegModel::params() const {
  std::vector<std::pair<std::string, Tensor>> out = encoder_->params();
  for (auto& p : codebook_->params()) out.push_back(std::move(p));
  for (auto& p : embedder_->params()) out.push_back(std::move(p));
  for (auto& p : decoder_->params()) out.push_back(std::move(p));
  return out;
}

}  // namespace pixelseg
