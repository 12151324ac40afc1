#include "pixelseg/codebook.hpp"

#include "pixelseg/error.hpp"
#include "pixelseg/ops.hpp"

namespace pixelseg {

SegCodebook::SegCodebook(const CodebookConfig& config, std::mt19937_64& rng)
    : config_(config) {
  if (config.scales == 0 || config.tokens_per_group == 0 || config.dim == 0) {
    throw ConfigError("codebook: scales, tokens_per_group and dim must be positive");
  }
  for (std::size_t l = 0; l < config.scales; ++l) {
    tokens_.push_back(Tensor::randn({config.tokens_per_group, config.dim}, rng, 0.02,
                                    /*requires_grad=*/true));
  }
  const std::size_t in = config.tokens_per_group * config.dim;
  const double stddev = std::sqrt(2.0 / static_cast<double>(in + config.dim));
  fuse_w_ = Tensor::randn({config.dim, in}, rng, stddev, /*requires_grad=*/true);
  fuse_b_ = Tensor::zeros({config.dim}, /*requires_grad=*/true);
}

const Tensor& SegCodebook::group_tokens(std::size_t scale) const {
  if (scale >= tokens_.size()) {
    throw DimensionError("codebook: scale " + std::to_string(scale) + " out of range");
  }
  return tokens_[scale];
}

Tensor SegCodebook::fuse_tokens(const Tensor& group_hiddens) const {
  if (group_hiddens.rank() != 2 || group_hiddens.dim(0) != config_.tokens_per_group ||
      group_hiddens.dim(1) != config_.dim) {
    throw DimensionError("fuse_tokens: expected (" + std::to_string(config_.tokens_per_group) +
                         "," + std::to_string(config_.dim) + "), got " +
                         shape_str(group_hiddens.shape()));
  }
  Tensor flat = reshape(group_hiddens, {1, config_.tokens_per_group * config_.dim});
  return linear(flat, fuse_w_, fuse_b_);
}

std::vector<std::pair<std::string, Tensor>> SegCodebook::params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t l = 0; l < tokens_.size(); ++l) {
    out.emplace_back("codebook.scale" + std::to_string(l) + ".tokens", tokens_[l]);
  }
  out.emplace_back("codebook.fuse.weight", fuse_w_);
  out.emplace_back("codebook.fuse.bias", fuse_b_);
  return out;
}

}  // namespace pixelseg
