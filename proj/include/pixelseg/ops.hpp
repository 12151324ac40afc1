#pragma once

#include <cstddef>
#include <vector>

#include "pixelseg/tensor.hpp"

namespace pixelseg {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double c);
Tensor scalar_mul(const Tensor& x, double c);
// x * s where s is a single-element tensor participating in the graph.
Tensor scale_by(const Tensor& x, const Tensor& s);
// Single element x[i] as a 1-element tensor.
Tensor element(const Tensor& x, std::size_t i);

Tensor sigmoid(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor log_elem(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// (m,k) @ (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);
// (B,m,k) @ (B,k,n) -> (B,m,n)
Tensor bmm(const Tensor& a, const Tensor& b);
// x:(rows,in) W:(out,in) b:(out) -> (rows,out); y = x W^T + b
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose2d(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);
// Normalizes over the last axis; gamma/beta have that axis's width. eps=1e-5.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape new_shape);
// Rows [start, start+count) of a 2-D tensor.
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
// x:(rows,cols) + row:(1,cols) broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& row);

// Bilinear interpolation with the align-corners=false convention, on (H,W)
// or (C,H,W) tensors. Up- and down-scaling both supported.
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

// f:(C,H,W) scaled pointwise by m:(H,W) across every channel.
Tensor scale_channels(const Tensor& f, const Tensor& m);

// x:(Cin,H,W) w:(Cout,Cin,kh,kw) b:(Cout), no padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride);

// (C,H,W) -> (H*W, C) and back; plain data movement, no flops.
Tensor chw_to_mat(const Tensor& x);
Tensor mat_to_chw(const Tensor& x, std::size_t h, std::size_t w);

}  // namespace pixelseg
