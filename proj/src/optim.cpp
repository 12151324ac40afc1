#include "pixelseg/optim.hpp"

#include <cmath>

#include "pixelseg/error.hpp"

namespace pixelseg {

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, const AdamWConfig& config)
    : params_(std::move(params)), config_(config) {
  if (config.total_steps == 0) throw ConfigError("optimizer: total_steps must be positive");
  if (config.warmup_steps >= config.total_steps) {
    throw ConfigError("optimizer: warmup must end before total_steps");
  }
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

double AdamW::lr_at(std::size_t step) const {
  const double base = config_.learning_rate;
  if (config_.warmup_steps > 0 && step <= config_.warmup_steps) {
    return base * static_cast<double>(step) / static_cast<double>(config_.warmup_steps);
  }
  const double span = static_cast<double>(config_.total_steps - config_.warmup_steps);
  const double remaining = static_cast<double>(config_.total_steps) - static_cast<double>(step);
  return base * std::max(0.0, remaining / span);
}

void AdamW::step(double grad_scale) {
  ++t_;
  const double lr = lr_at(t_);
  last_lr_ = lr;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double inv_scale = 1.0 / grad_scale;
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi].second;
    if (!p.has_grad()) continue;
    auto& data = p.data();
    auto& grad = p.grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i] * inv_scale;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * data[i]);
    }
  }
  zero_grad();
}

void AdamW::zero_grad() {
  for (auto& [name, p] : params_) {
    if (p.has_grad()) p.zero_grad();
  }
}

}  // namespace pixelseg
