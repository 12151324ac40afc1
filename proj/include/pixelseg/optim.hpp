#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pixelseg/tensor.hpp"

namespace pixelseg {

struct AdamWConfig {
  double learning_rate = 3.0e-4;
  double weight_decay = 0.0;  // decoupled
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 2000;
};

// AdamW with linear warmup followed by linear decay to zero.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, const AdamWConfig& config);

  // Consumes accumulated gradients (scaled by 1/grad_scale), applies the
  // update at the scheduled learning rate and zeroes every gradient.
  void step(double grad_scale = 1.0);

  void zero_grad();
  std::size_t steps_taken() const { return t_; }
  double last_lr() const { return last_lr_; }
  double lr_at(std::size_t step) const;  // 1-based

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
  double last_lr_ = 0.0;
};

}  // namespace pixelseg
