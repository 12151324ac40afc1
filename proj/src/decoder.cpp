#include "pixelseg/decoder.hpp"

#include <cmath>

#include "pixelseg/error.hpp"
#include "pixelseg/ops.hpp"

namespace pixelseg {

namespace {

void validate_config(const DecoderConfig& c) {
  if (c.scales == 0 || c.dim == 0 || c.out_tokens == 0 || c.mlp_width == 0) {
    throw ConfigError("decoder: scales, dim, out_tokens and mlp_width must be positive");
  }
  if (c.dim % 2 != 0) throw ConfigError("decoder: dim must be even for the position encoding");
  if (c.upscale == 0) throw ConfigError("decoder: upscale must be positive");
  if (c.level_sizes.size() != c.scales) {
    throw ConfigError("decoder: level_sizes must list one (H,W) per scale");
  }
  for (const auto& [h, w] : c.level_sizes) {
    if (h == 0 || w == 0) throw ConfigError("decoder: empty level size");
  }
}

}  // namespace

Tensor sinusoidal_position_encoding(std::size_t h, std::size_t w, std::size_t dim) {
  if (dim % 2 != 0) throw ConfigError("position encoding: dim must be even");
  const std::size_t half = dim / 2;
  constexpr double kTemperature = 10000.0;
  Tensor pe = Tensor::zeros({h * w, dim});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double* row = pe.data().data() + (y * w + x) * dim;
      for (std::size_t i = 0; i < half; ++i) {
        const double freq = std::pow(kTemperature, 2.0 * static_cast<double>(i / 2) /
                                                       static_cast<double>(half));
        const double vy = static_cast<double>(y) / freq;
        const double vx = static_cast<double>(x) / freq;
        row[i] = (i % 2 == 0) ? std::sin(vy) : std::cos(vy);
        row[half + i] = (i % 2 == 0) ? std::sin(vx) : std::cos(vx);
      }
    }
  }
  return pe;
}

Tensor feature_modulate(const Tensor& f, const Tensor& mask_prev) {
  if (f.rank() != 3) throw DimensionError("feature_modulate: expected f(C,H,W)");
  if (mask_prev.rank() != 2) throw DimensionError("feature_modulate: expected mask (H,W)");
  Tensor resized = bilinear_resize(mask_prev, f.dim(1), f.dim(2));
  Tensor multiplier = add_scalar(sigmoid(resized), 1.0);
  return scale_channels(f, multiplier);
}

PixelDecoder::PixelDecoder(const DecoderConfig& config, std::mt19937_64& rng)
    : config_(config) {
  validate_config(config);
  const std::size_t d = config.dim;
  const double attn_std = std::sqrt(1.0 / static_cast<double>(d));
  const double mlp_in_std = std::sqrt(2.0 / static_cast<double>(d + config.mlp_width));

  auto make_attention = [&] {
    Attention a;
    for (Tensor* w : {&a.wq, &a.wk, &a.wv, &a.wo}) {
      *w = Tensor::randn({d, d}, rng, attn_std, true);
    }
    for (Tensor* b : {&a.bq, &a.bk, &a.bv, &a.bo}) {
      *b = Tensor::zeros({d}, true);
    }
    return a;
  };
  auto make_mlp = [&] {
    Mlp m;
    m.w1 = Tensor::randn({config.mlp_width, d}, rng, mlp_in_std, true);
    m.b1 = Tensor::zeros({config.mlp_width}, true);
    m.w2 = Tensor::randn({d, config.mlp_width}, rng, mlp_in_std, true);
    m.b2 = Tensor::zeros({d}, true);
    return m;
  };
  auto make_norm = [&] {
    Norm n;
    n.gamma = Tensor::full({d}, 1.0, true);
    n.beta = Tensor::zeros({d}, true);
    return n;
  };

  for (std::size_t l = 0; l < config.scales; ++l) {
    ScaleBlock block;
    block.self_attn = make_attention();
    block.cross_tf = make_attention();
    block.cross_ft = make_attention();
    block.mlp = make_mlp();
    block.mask_mlp = make_mlp();
    block.norm_token1 = make_norm();
    block.norm_token2 = make_norm();
    block.norm_feature = make_norm();
    const auto [h, w] = config.level_sizes[l];
    block.image_pe = sinusoidal_position_encoding(h, w, d);
    blocks_.push_back(std::move(block));
  }
  out_token_ = Tensor::randn({config.out_tokens, d}, rng, 0.02, true);
  lev_token_ = Tensor::randn({config.scales, d}, rng, 0.02, true);
  gamma_logits_ = Tensor::zeros({config.scales}, true);
}

Tensor PixelDecoder::run_attention(const Attention& p, const Tensor& q_in, const Tensor& k_in,
                                   const Tensor& v_in) const {
  Tensor q = linear(q_in, p.wq, p.bq);
  Tensor k = linear(k_in, p.wk, p.bk);
  Tensor v = linear(v_in, p.wv, p.bv);
  Tensor scores = scalar_mul(matmul(q, transpose2d(k)), 1.0 / std::sqrt(static_cast<double>(config_.dim)));
  Tensor attn = softmax(scores, 1);
  return linear(matmul(attn, v), p.wo, p.bo);
}

Tensor PixelDecoder::run_mlp(const Mlp& p, const Tensor& x) const {
  return linear(gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

std::pair<Tensor, Tensor> PixelDecoder::attention_block(const Tensor& h, const Tensor& f,
                                                        std::size_t level) const {
  if (level >= blocks_.size()) throw DimensionError("attention_block: level out of range");
  if (h.rank() != 2 || h.dim(0) != 1 || h.dim(1) != config_.dim) {
    throw DimensionError("attention_block: h must be (1," + std::to_string(config_.dim) +
                         "), got " + shape_str(h.shape()));
  }
  const auto [lh, lw] = config_.level_sizes[level];
  if (f.rank() != 3 || f.dim(0) != config_.dim || f.dim(1) != lh || f.dim(2) != lw) {
    throw DimensionError("attention_block: f must be (" + std::to_string(config_.dim) + "," +
                         std::to_string(lh) + "," + std::to_string(lw) + "), got " +
                         shape_str(f.shape()));
  }
  const ScaleBlock& block = blocks_[level];

  Tensor token = concat({out_token_, h}, 0);  // (N_out+1, d)
  token = add_row(token, slice_rows(lev_token_, level, 1));

  Tensor sa = run_attention(block.self_attn, token, token, token);
  token = layer_norm(add(token, sa), block.norm_token1.gamma, block.norm_token1.beta);

  Tensor f_mat = chw_to_mat(f);                // (HW, d)
  Tensor key = add(f_mat, block.image_pe);     // (HW, d)

  Tensor ca = run_attention(block.cross_tf, token, key, f_mat);
  token = layer_norm(add(add(token, ca), run_mlp(block.mlp, token)), block.norm_token2.gamma,
                     block.norm_token2.beta);

  Tensor fa = run_attention(block.cross_ft, key, token, token);
  Tensor f_new = layer_norm(add(f_mat, fa), block.norm_feature.gamma, block.norm_feature.beta);

  const std::size_t uh = config_.upscale * lh, uw = config_.upscale * lw;
  Tensor f_up = bilinear_resize(mat_to_chw(f_new, lh, lw), uh, uw);  // (d, uh, uw)

  Tensor mask_tokens = run_mlp(block.mask_mlp, token);  // (N_out+1, d)
  Tensor per_token = matmul(mask_tokens, reshape(f_up, {config_.dim, uh * uw}));
  Tensor mask = reshape(mean_axis(per_token, 0), {uh, uw});
  return {mask, mat_to_chw(f_new, lh, lw)};
}

std::vector<MaskLogits> PixelDecoder::decode(
    const std::vector<std::vector<Tensor>>& h_per_target,
    const MultiScaleFeatures& features) const {
  const std::size_t L = config_.scales;
  if (features.levels.size() != L) {
    throw DimensionError("decode: feature pyramid has " + std::to_string(features.levels.size()) +
                         " levels, decoder expects " + std::to_string(L));
  }
  Tensor gamma = softmax(gamma_logits_, 0);
  const auto [fh, fw] = config_.level_sizes.front();
  const std::size_t out_h = config_.upscale * fh, out_w = config_.upscale * fw;

  std::vector<MaskLogits> out;
  out.reserve(h_per_target.size());
  for (const std::vector<Tensor>& h_scales : h_per_target) {
    if (h_scales.size() != L) {
      throw DimensionError("decode: target carries " + std::to_string(h_scales.size()) +
                           " embeddings, decoder expects " + std::to_string(L));
    }
    MaskLogits result;
    result.per_scale.resize(L);
    Tensor prev_mask;
    for (std::size_t step = 0; step < L; ++step) {
      const std::size_t l = L - 1 - step;  // deepest first
      Tensor f = features.levels[l];
      if (step > 0) f = feature_modulate(f, prev_mask);
      auto [mask, updated] = attention_block(h_scales[l], f, l);
      (void)updated;
      result.per_scale[l] = mask;
      prev_mask = mask;
    }
    Tensor fused;
    for (std::size_t l = 0; l < L; ++l) {
      Tensor aligned = bilinear_resize(result.per_scale[l], out_h, out_w);
      Tensor weighted = scale_by(aligned, element(gamma, l));
      fused = fused.defined() ? add(fused, weighted) : weighted;
    }
    result.fused = fused;
    result.gamma.assign(gamma.data().begin(), gamma.data().end());
    out.push_back(std::move(result));
  }
  return out;
}

std::vector<double> PixelDecoder::fusion_weights() const {
  NoGradGuard ng;
  Tensor gamma = softmax(gamma_logits_, 0);
  return gamma.data();
}

std::vector<std::pair<std::string, Tensor>> PixelDecoder::params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add_attention = [&out](const std::string& prefix, const Attention& a) {
    out.emplace_back(prefix + ".wq", a.wq);
    out.emplace_back(prefix + ".bq", a.bq);
    out.emplace_back(prefix + ".wk", a.wk);
    out.emplace_back(prefix + ".bk", a.bk);
    out.emplace_back(prefix + ".wv", a.wv);
    out.emplace_back(prefix + ".bv", a.bv);
    out.emplace_back(prefix + ".wo", a.wo);
    out.emplace_back(prefix + ".bo", a.bo);
  };
  auto add_mlp = [&out](const std::string& prefix, const Mlp& m) {
    out.emplace_back(prefix + ".w1", m.w1);
    out.emplace_back(prefix + ".b1", m.b1);
    out.emplace_back(prefix + ".w2", m.w2);
    out.emplace_back(prefix + ".b2", m.b2);
  };
  auto add_norm = [&out](const std::string& prefix, const Norm& n) {
    out.emplace_back(prefix + ".gamma", n.gamma);
    out.emplace_back(prefix + ".beta", n.beta);
  };
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = "decoder.scale" + std::to_string(l);
    add_attention(p + ".self_attn", blocks_[l].self_attn);
    add_norm(p + ".norm_token1", blocks_[l].norm_token1);
    add_attention(p + ".cross_tf", blocks_[l].cross_tf);
    add_mlp(p + ".mlp", blocks_[l].mlp);
    add_norm(p + ".norm_token2", blocks_[l].norm_token2);
    add_attention(p + ".cross_ft", blocks_[l].cross_ft);
    add_norm(p + ".norm_feature", blocks_[l].norm_feature);
    add_mlp(p + ".mask_mlp", blocks_[l].mask_mlp);
  }
  out.emplace_back("decoder.out_token", out_token_);
  out.emplace_back("decoder.lev_token", lev_token_);
  out.emplace_back("decoder.gamma_logits", gamma_logits_);
  return out;
}

FlopsBreakdown flops_breakdown(const DecoderConfig& config, std::size_t targets) {
  validate_config(config);
  FlopsBreakdown fb;
  if (targets == 0) return fb;
  const std::uint64_t K = targets;
  const std::uint64_t T = config.out_tokens + 1;
  const std::uint64_t d = config.dim;
  const std::uint64_t m = config.mlp_width;
  const std::uint64_t u2 = static_cast<std::uint64_t>(config.upscale) * config.upscale;
  const auto [fh, fw] = config.level_sizes.front();
  const std::uint64_t finest_up = u2 * fh * fw;

  for (std::size_t l = 0; l < config.scales; ++l) {
    const auto [h, w] = config.level_sizes[l];
    const std::uint64_t P = static_cast<std::uint64_t>(h) * w;
    // Attention = 4 projections + scaled score matrix + attention-weighted sum.
    fb.self_attention += K * (4 * T * d * d + 2 * T * T * d + T * T);
    // Two cross attentions per block; token rows project at T*d*d each side.
    fb.cross_attention_token_side += K * 2 * (2 * T * d * d);
    fb.cross_attention_feature_side += K * 2 * (2 * P * d * d + 2 * T * P * d + T * P);
    fb.token_mlps += K * 4 * T * d * m;
    fb.feature_upscale += K * 4 * d * u2 * P;
    fb.mask_products += K * T * d * u2 * P;
    if (l + 1 < config.scales) {
      // Deeper mask resized down, then sigmoid+1 scaling of every channel.
      fb.modulation += K * (4 * P + d * P);
    }
    fb.mask_fusion += K * (4 * finest_up + finest_up);
  }
  return fb;
}

std::uint64_t flops_estimate(const DecoderConfig& config, std::size_t targets) {
  return flops_breakdown(config, targets).total();
}

}  // namespace pixelseg
