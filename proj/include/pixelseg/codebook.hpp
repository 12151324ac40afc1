#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pixelseg/tensor.hpp"

namespace pixelseg {

struct CodebookConfig {
  std::size_t scales = 2;            // L
  std::size_t tokens_per_group = 3;  // N_cb
  std::size_t dim = 16;              // d
};

// Learnable token grid: one group of tokens_per_group embeddings per visual
// scale, plus a single affine fusion map shared by all scales that collapses
// a group's hidden states into one embedding.
class SegCodebook {
 public:
  SegCodebook(const CodebookConfig& config, std::mt19937_64& rng);

  const CodebookConfig& config() const { return config_; }

  // Tokens of one scale group, shape (tokens_per_group, dim).
  const Tensor& group_tokens(std::size_t scale) const;

  // group_hiddens: (tokens_per_group, dim) -> fused (1, dim). Concatenates
  // in ascending token order, then applies the affine fusion map.
  Tensor fuse_tokens(const Tensor& group_hiddens) const;

  // Every token and fusion weight, names stable across constructions.
  std::vector<std::pair<std::string, Tensor>> params() const;

 private:
  CodebookConfig config_;
  std::vector<Tensor> tokens_;  // per scale, (N_cb, d)
  Tensor fuse_w_;               // (d, N_cb*d)
  Tensor fuse_b_;               // (d)
};

}  // namespace pixelseg
