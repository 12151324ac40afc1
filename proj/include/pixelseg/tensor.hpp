#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pixelseg/error.hpp"

namespace pixelseg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  bool tape_output = false;  // produced by a recorded op (non-leaf)

  std::size_t numel() const { return data.size(); }
  std::vector<double>& grad_ref() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

// Dense row-major float64 tensor. Copies share storage; ops return fresh
// tensors and record themselves on the active tape when grads are needed.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // Gaussian init, mean zero.
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev,
                      bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::vector<double>& grad() { return impl_->grad_ref(); }
  const std::vector<double>& grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

  // Scalar accessor; throws ContractError unless numel == 1.
  double value() const;

  // Detached copy of values (no tape participation).
  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

struct TapeEntry {
  const char* op;
  std::shared_ptr<TensorImpl> output;
  std::function<void()> backward;
};

// Wengert list. One tape per thread; recording order is a topological order
// of the graph, so a single reverse sweep propagates every gradient once.
class Tape {
 public:
  static Tape& active();

  bool enabled() const { return enabled_; }
  void set_enabled(bool v) { enabled_ = v; }

  void record(TapeEntry entry);
  std::size_t size() const { return entries_.size(); }
  void clear();

  // Seeds d(loss)=1 and sweeps the recorded ops in reverse. Leaf gradients
  // accumulate additively across calls; non-leaf gradients are reset here.
  void backward(const Tensor& loss);

 private:
  std::vector<TapeEntry> entries_;
  bool enabled_ = true;
};

struct NoGradGuard {
  NoGradGuard() : prev_(Tape::active().enabled()) {
    Tape::active().set_enabled(false);
  }
  ~NoGradGuard() { Tape::active().set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Thread-local multiply-accumulate counter fed by every forward op.
// Contractions count m*k*n style products, bilinear resize counts 4 per
// output element, elementwise products count 1 per element; additions,
// normalizations and transcendentals are not counted.
struct FlopCounter {
  static void reset();
  static std::uint64_t count();
  static void add(std::uint64_t muladds);
};

// Throws NumericError naming `op` if any value is non-finite.
void check_finite(const char* op, const Tensor& t);

// Flat binary format: u32 rank, u32 dims, then float64 data, little-endian.
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

}  // namespace pixelseg
