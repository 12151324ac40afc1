#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pixelseg/codebook.hpp"
#include "pixelseg/tensor.hpp"

namespace pixelseg {

// Ordered feature pyramid, deepest level last.
struct MultiScaleFeatures {
  std::vector<Tensor> levels;  // level l: (channels, H_l, W_l)
};

// Attribute query standing in for the per-target text instruction.
struct TargetSpec {
  int target_id = 0;
  std::vector<double> attributes;
};

struct EncoderConfig {
  std::size_t in_channels = 3;
  std::size_t trunk_width = 32;
  std::size_t enc_dim = 32;               // feature width of every tap (d_enc)
  std::size_t dec_dim = 16;               // decoder width after projection (d)
  std::vector<std::size_t> strides = {4, 8};  // cumulative stride per level
};

// Small stack of patchify convolutions standing in for the frozen vision
// backbone. Each level taps the trunk at its cumulative stride; taps use 1x1
// convolutions so a constant image yields constant feature maps.
class ToyEncoder {
 public:
  ToyEncoder(const EncoderConfig& config, std::mt19937_64& rng);

  const EncoderConfig& config() const { return config_; }
  std::size_t num_levels() const { return config_.strides.size(); }

  // image: (in_channels, H, W) with H and W divisible by the deepest stride.
  MultiScaleFeatures encode_multiscale(const Tensor& image) const;

  // Per-level affine projection from enc_dim to dec_dim widths.
  MultiScaleFeatures project_to_decoder(const MultiScaleFeatures& features) const;

  std::vector<std::pair<std::string, Tensor>> params() const;

 private:
  EncoderConfig config_;
  std::vector<std::size_t> stage_factors_;
  std::vector<Tensor> stage_w_, stage_b_;    // patchify conv per stage
  std::vector<Tensor> refine_w_, refine_b_;  // 1x1 conv per stage
  std::vector<Tensor> tap_w_, tap_b_;        // 1x1 conv trunk -> enc_dim
  std::vector<Tensor> proj_w_, proj_b_;      // 1x1 conv enc_dim -> dec_dim
};

struct EmbedderConfig {
  std::size_t attr_dim = 7;
  std::size_t hidden = 64;
};

// Produces per-target hidden embeddings for every codebook token: the
// codebook token plus a target-conditioned offset computed from the attribute
// query and the pooled global image feature.
class TargetEmbedder {
 public:
  TargetEmbedder(const EmbedderConfig& config, const CodebookConfig& codebook,
                 std::mt19937_64& rng);

  // global_feature: (1, dec_dim). Returns hiddens[k][l] with shape
  // (tokens_per_group, dim), so the full output is K x L x N_cb x d.
  std::vector<std::vector<Tensor>> embed_targets(const std::vector<TargetSpec>& specs,
                                                 const Tensor& global_feature,
                                                 const SegCodebook& codebook) const;

  std::vector<std::pair<std::string, Tensor>> params() const;

 private:
  EmbedderConfig config_;
  CodebookConfig codebook_config_;
  Tensor w1_, b1_, w2_, b2_;
};

}  // namespace pixelseg
