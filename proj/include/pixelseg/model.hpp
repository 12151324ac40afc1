#pragma once

#include <memory>

#include "pixelseg/codebook.hpp"
#include "pixelseg/decoder.hpp"
#include "pixelseg/encoder.hpp"

namespace pixelseg {

struct ModelConfig {
  EncoderConfig encoder;
  CodebookConfig codebook;
  EmbedderConfig embedder;
  std::size_t out_tokens = 2;
  std::size_t mlp_width = 32;
  std::size_t upscale = 4;
  std::size_t image_size = 64;

  std::size_t scales() const { return encoder.strides.size(); }
  DecoderConfig decoder_config() const;
  void validate() const;
};

// Encoder, codebook, embedder and decoder wired end to end: image plus
// per-target attribute queries in, per-target mask logits out.
class SegModel {
 public:
  SegModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ToyEncoder& encoder() const { return *encoder_; }
  const SegCodebook& codebook() const { return *codebook_; }
  const TargetEmbedder& embedder() const { return *embedder_; }
  const PixelDecoder& decoder() const { return *decoder_; }

  std::vector<MaskLogits> forward(const Tensor& image,
                                  const std::vector<TargetSpec>& specs) const;

  std::vector<std::pair<std::string, Tensor>> params() const;

 private:
  ModelConfig config_;
  std::unique_ptr<ToyEncoder> encoder_;
  std::unique_ptr<SegCodebook> codebook_;
  std::unique_ptr<TargetEmbedder> embedder_;
  std::unique_ptr<PixelDecoder> decoder_;
};

}  // namespace pixelseg
