#pragma once

#include <cmath>
#include <functional>

#include "pixelseg/tensor.hpp"

namespace pixelseg::testutil {

// Central finite differences against the tape gradient for a *parameter*
// tensor: forward_loss rebuilds the graph from current parameter values.
// Returns max over coordinates of |analytic - central| / max(1, |central|).
inline double param_finite_diff_check(const std::function<Tensor()>& forward_loss,
                                      Tensor param, double h) {
  Tape& tape = Tape::active();
  tape.clear();
  param.zero_grad();
  Tensor loss = forward_loss();
  tape.backward(loss);
  tape.clear();
  const std::vector<double> analytic = param.grad();
  param.zero_grad();

  double max_err = 0.0;
  NoGradGuard ng;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double orig = param.data()[i];
    param.data()[i] = orig + h;
    const double fp = forward_loss().value();
    param.data()[i] = orig - h;
    const double fm = forward_loss().value();
    param.data()[i] = orig;
    const double central = (fp - fm) / (2.0 * h);
    const double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace pixelseg::testutil
