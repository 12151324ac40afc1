#pragma once

#include <functional>

#include "pixelseg/tensor.hpp"

namespace pixelseg {

// Scalar-valued function of one tensor, built from tape ops.
using ScalarFn = std::function<Tensor(const Tensor&)>;

// Compares the tape gradient of f at x against central finite differences
// with step h. Returns max over coordinates of
//   |analytic - central| / max(1, |central|).
// f must be deterministic; non-finite values raise NumericError.
double finite_diff_check(const ScalarFn& f, const Tensor& x, double h);

}  // namespace pixelseg
