#include "pixelseg/gradcheck.hpp"

#include <cmath>

#include "pixelseg/error.hpp"

namespace pixelseg {

// Uses and clears the calling thread's tape.
double finite_diff_check(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_check: step must be positive");

  Tensor probe = Tensor::from_data(x.shape(), x.data(), /*requires_grad=*/true);
  Tape& tape = Tape::active();
  const bool was_enabled = tape.enabled();
  tape.set_enabled(true);
  tape.clear();
  std::vector<double> analytic;
  try {
    Tensor loss = f(probe);
    if (loss.numel() != 1) throw ContractError("finite_diff_check: f must return a scalar");
    tape.backward(loss);
    analytic = probe.grad();
  } catch (...) {
    tape.clear();
    tape.set_enabled(was_enabled);
    throw;
  }
  tape.clear();
  tape.set_enabled(was_enabled);

  Tensor work = Tensor::from_data(x.shape(), x.data());
  double max_err = 0.0;
  {
    NoGradGuard ng;
    for (std::size_t i = 0; i < work.numel(); ++i) {
      const double orig = work.data()[i];
      work.data()[i] = orig + h;
      const double fp = f(work).value();
      work.data()[i] = orig - h;
      const double fm = f(work).value();
      work.data()[i] = orig;
      const double central = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace pixelseg
