#include <random>

#include "doctest.h"
#include "pixelseg/decoder.hpp"

using namespace pixelseg;

namespace {

DecoderConfig flops_config(std::size_t h, std::size_t w) {
  DecoderConfig c;
  c.scales = 2;
  c.dim = 16;
  c.out_tokens = 2;
  c.mlp_width = 32;
  c.level_sizes = {{h, w}, {h / 2, w / 2}};
  return c;
}

std::uint64_t measured_decode_flops(const DecoderConfig& config, std::size_t targets,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PixelDecoder dec(config, rng);
  MultiScaleFeatures f;
  for (const auto& [h, w] : config.level_sizes) {
    f.levels.push_back(Tensor::randn({config.dim, h, w}, rng, 1.0));
  }
  std::vector<std::vector<Tensor>> hiddens(targets);
  for (auto& per_scale : hiddens) {
    for (std::size_t l = 0; l < config.scales; ++l) {
      per_scale.push_back(Tensor::randn({1, config.dim}, rng, 1.0));
    }
  }
  NoGradGuard ng;
  FlopCounter::reset();
  dec.decode(hiddens, f);
  return FlopCounter::count();
}

}  // namespace

TEST_CASE("closed-form estimate matches the instrumented mul-add counter") {
  const DecoderConfig c1 = flops_config(8, 8);
  const std::uint64_t measured = measured_decode_flops(c1, 3, 41);
  const std::uint64_t estimated = flops_estimate(c1, 3);
  const double rel = std::abs(static_cast<double>(measured) - static_cast<double>(estimated)) /
                     static_cast<double>(measured);
  INFO("measured " << measured << " estimated " << estimated);
  CHECK(rel < 0.01);
}

TEST_CASE("zero-target batches cost nothing") {
  CHECK(flops_estimate(flops_config(8, 8), 0) == 0);
}

TEST_CASE("doubling both spatial axes quadruples the feature-side cross-attention cost") {
  const FlopsBreakdown small = flops_breakdown(flops_config(8, 8), 2);
  const FlopsBreakdown big = flops_breakdown(flops_config(16, 16), 2);
  CHECK(big.cross_attention_feature_side == 4 * small.cross_attention_feature_side);
  CHECK(big.self_attention == small.self_attention);
  CHECK(big.token_mlps == small.token_mlps);
}

TEST_CASE("estimate scales linearly with the target count") {
  const DecoderConfig c = flops_config(8, 8);
  CHECK(flops_estimate(c, 4) == 2 * flops_estimate(c, 2));
}
