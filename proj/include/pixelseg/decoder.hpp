#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pixelseg/encoder.hpp"
#include "pixelseg/tensor.hpp"

namespace pixelseg {

struct DecoderConfig {
  std::size_t scales = 2;      // L
  std::size_t dim = 16;        // d, must be even for the positional encoding
  std::size_t out_tokens = 2;  // N_out >= 1
  std::size_t mlp_width = 32;
  std::size_t upscale = 4;
  // Per level (H, W), finest first, deepest last.
  std::vector<std::pair<std::size_t, std::size_t>> level_sizes;
};

// Per-target decoding result. Per-scale maps live on their own upscaled
// grids; the fused map lives on the finest grid.
struct MaskLogits {
  std::vector<Tensor> per_scale;  // level l: (upscale*H_l, upscale*W_l)
  Tensor fused;
  std::vector<double> gamma;  // fusion weights after softmax, length L
};

struct FlopsBreakdown {
  std::uint64_t self_attention = 0;
  std::uint64_t cross_attention_token_side = 0;    // projections of token rows
  std::uint64_t cross_attention_feature_side = 0;  // projections and scores over H*W keys
  std::uint64_t token_mlps = 0;
  std::uint64_t feature_upscale = 0;
  std::uint64_t mask_products = 0;
  std::uint64_t modulation = 0;
  std::uint64_t mask_fusion = 0;
  std::uint64_t total() const {
    return self_attention + cross_attention_token_side + cross_attention_feature_side +
           token_mlps + feature_upscale + mask_products + modulation + mask_fusion;
  }
};

// Multiplies every channel of f (d,H,W) pointwise by sigmoid(m)+1, after
// resizing the deeper scale's mask map m down to HxW. The multiplier is
// bounded in (1,2), so features are rescaled but never suppressed to zero.
Tensor feature_modulate(const Tensor& f, const Tensor& mask_prev);

// L per-scale attention blocks with cross-scale mask modulation and learned
// softmax-normalized fusion weights.
class PixelDecoder {
 public:
  PixelDecoder(const DecoderConfig& config, std::mt19937_64& rng);

  const DecoderConfig& config() const { return config_; }

  // One scale's block: fused token h (1,d) against features f (d,H,W).
  // Returns the upscaled mask map and the attention-updated features.
  std::pair<Tensor, Tensor> attention_block(const Tensor& h, const Tensor& f,
                                            std::size_t level) const;

  // h_per_target[k][l]: fused embedding (1,d) for target k at level l.
  // Scales are processed deepest-first; every later scale sees features
  // modulated by the previous mask. Targets are independent.
  std::vector<MaskLogits> decode(const std::vector<std::vector<Tensor>>& h_per_target,
                                 const MultiScaleFeatures& features) const;

  // Fusion weights after softmax; positive, summing to one.
  std::vector<double> fusion_weights() const;

  std::vector<std::pair<std::string, Tensor>> params() const;

 private:
  struct Attention {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Mlp {
    Tensor w1, b1, w2, b2;
  };
  struct Norm {
    Tensor gamma, beta;
  };
  struct ScaleBlock {
    Attention self_attn, cross_tf, cross_ft;
    Mlp mlp, mask_mlp;
    Norm norm_token1, norm_token2, norm_feature;
    Tensor image_pe;  // (H*W, d), fixed sinusoidal, not trainable
  };

  Tensor run_attention(const Attention& p, const Tensor& q_in, const Tensor& k_in,
                       const Tensor& v_in) const;
  Tensor run_mlp(const Mlp& p, const Tensor& x) const;

  DecoderConfig config_;
  std::vector<ScaleBlock> blocks_;
  Tensor out_token_;   // (N_out, d)
  Tensor lev_token_;   // (L, d)
  Tensor gamma_logits_;  // (L)
};

// Closed-form multiply-accumulate count of decode() for `targets` targets,
// mirroring the per-op counting rules of the numeric layer.
std::uint64_t flops_estimate(const DecoderConfig& config, std::size_t targets);
FlopsBreakdown flops_breakdown(const DecoderConfig& config, std::size_t targets);

// Fixed 2-D sinusoidal position embedding, laid out (H*W, dim).
Tensor sinusoidal_position_encoding(std::size_t h, std::size_t w, std::size_t dim);

}  // namespace pixelseg
