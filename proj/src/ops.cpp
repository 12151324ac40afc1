#include "pixelseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

namespace pixelseg {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active().enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void finish(const char* op, Tensor& out, bool record, std::function<void()> backward) {
  check_finite(op, out);
  if (record) {
    Tape::active().record(TapeEntry{op, out.impl(), std::move(backward)});
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

// Splits a shape into (outer, axis, inner) extents around `axis`.
void axis_extents(const char* op, const Shape& shape, std::size_t axis,
                  std::size_t& outer, std::size_t& n, std::size_t& inner) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(shape));
  }
  outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  n = shape[axis];
  inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

struct ResizeAxis {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w;  // weight of hi; 1-w goes to lo
};

ResizeAxis resize_axis(std::size_t in, std::size_t out) {
  ResizeAxis r;
  r.lo.resize(out);
  r.hi.resize(out);
  r.w.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::min(std::max(src, 0.0), static_cast<double>(in - 1));
    std::size_t lo = static_cast<std::size_t>(src);
    r.lo[o] = lo;
    r.hi[o] = std::min(lo + 1, in - 1);
    r.w[o] = src - static_cast<double>(lo);
  }
  return r;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const bool rec = wants_grad({&a, &b});
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  finish("add", out, rec, [ai, bi, oi] {
    if (ai->requires_grad) {
      auto& g = ai->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const bool rec = wants_grad({&a, &b});
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  finish("sub", out, rec, [ai, bi, oi] {
    if (ai->requires_grad) {
      auto& g = ai->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= oi->grad[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const bool rec = wants_grad({&a, &b});
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  FlopCounter::add(n);
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  finish("mul", out, rec, [ai, bi, oi] {
    if (ai->requires_grad) {
      auto& g = ai->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * ai->data[i];
    }
  });
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  const bool rec = wants_grad({&a, &b});
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  FlopCounter::add(n);
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] / b.data()[i];
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  finish("div", out, rec, [ai, bi, oi] {
    if (ai->requires_grad) {
      auto& g = ai->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] / bi->data[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] -= oi->grad[i] * ai->data[i] / (bi->data[i] * bi->data[i]);
      }
    }
  });
  return out;
}

Tensor add_scalar(const Tensor& x, double c) {
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] + c;
  auto xi = x.impl(), oi = out.impl();
  finish("add_scalar", out, rec, [xi, oi] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
  });
  return out;
}

Tensor scalar_mul(const Tensor& x, double c) {
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = out.numel();
  FlopCounter::add(n);
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * c;
  auto xi = x.impl(), oi = out.impl();
  finish("scalar_mul", out, rec, [xi, oi, c] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * c;
  });
  return out;
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("scale_by: scale must have one element");
  const bool rec = wants_grad({&x, &s});
  Tensor out = Tensor::zeros(x.shape());
  const double sv = s.data()[0];
  const std::size_t n = out.numel();
  FlopCounter::add(n);
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * sv;
  auto xi = x.impl(), si = s.impl(), oi = out.impl();
  finish("scale_by", out, rec, [xi, si, oi] {
    const double sv = si->data[0];
    if (xi->requires_grad) {
      auto& g = xi->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * sv;
    }
    if (si->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < oi->grad.size(); ++i) acc += oi->grad[i] * xi->data[i];
      si->grad_ref()[0] += acc;
    }
  });
  return out;
}

Tensor element(const Tensor& x, std::size_t i) {
  if (i >= x.numel()) {
    throw DimensionError("element: index " + std::to_string(i) + " out of range");
  }
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::scalar(x.data()[i]);
  auto xi = x.impl(), oi = out.impl();
  finish("element", out, rec, [xi, oi, i] {
    if (xi->requires_grad) xi->grad_ref()[i] += oi->grad[0];
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  auto xi = x.impl(), oi = out.impl();
  finish("sigmoid", out, rec, [xi, oi] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = oi->data[i];
      g[i] += oi->grad[i] * s * (1.0 - s);
    }
  });
  return out;
}

Tensor gelu(const Tensor& x) {
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  auto xi = x.impl(), oi = out.impl();
  finish("gelu", out, rec, [xi, oi] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xi->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += oi->grad[i] * (cdf + v * pdf);
    }
  });
  return out;
}

Tensor log_elem(const Tensor& x) {
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::log(x.data()[i]);
  auto xi = x.impl(), oi = out.impl();
  finish("log", out, rec, [xi, oi] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] / xi->data[i];
  });
  return out;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo < hi)) throw ContractError("clamp: lo must be below hi");
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::min(std::max(x.data()[i], lo), hi);
  auto xi = x.impl(), oi = out.impl();
  finish("clamp", out, rec, [xi, oi, lo, hi] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xi->data[i] > lo && xi->data[i] < hi) g[i] += oi->grad[i];
    }
  });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " @ " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const bool rec = wants_grad({&a, &b});
  Tensor out = Tensor::zeros({m, n});
  FlopCounter::add(static_cast<std::uint64_t>(m) * k * n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ad[i * k + kk];
      const double* brow = bd + kk * n;
      double* orow = od + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  finish("matmul", out, rec, [ai, bi, oi, m, k, n] {
    const std::vector<double>& go = oi->grad;
    if (ai->requires_grad) {
      auto& ga = ai->grad_ref();
      // dA = dO @ B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          const double* grow = go.data() + i * n;
          const double* brow = bi->data.data() + kk * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + kk] += acc;
        }
      }
    }
    if (bi->requires_grad) {
      auto& gb = bi->grad_ref();
      // dB = A^T @ dO
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ai->data.data() + i * k;
        const double* grow = go.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          double* gbrow = gb.data() + kk * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " @ " +
                         shape_str(b.shape()));
  }
  const std::size_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  const bool rec = wants_grad({&a, &b});
  Tensor out = Tensor::zeros({B, m, n});
  FlopCounter::add(static_cast<std::uint64_t>(B) * m * k * n);
  for (std::size_t bb = 0; bb < B; ++bb) {
    const double* ad = a.data().data() + bb * m * k;
    const double* bd = b.data().data() + bb * k * n;
    double* od = out.data().data() + bb * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = ad[i * k + kk];
        for (std::size_t j = 0; j < n; ++j) od[i * n + j] += av * bd[kk * n + j];
      }
    }
  }
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  finish("bmm", out, rec, [ai, bi, oi, B, m, k, n] {
    for (std::size_t bb = 0; bb < B; ++bb) {
      const double* go = oi->grad.data() + bb * m * n;
      if (ai->requires_grad) {
        double* ga = ai->grad_ref().data() + bb * m * k;
        const double* bd = bi->data.data() + bb * k * n;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * bd[kk * n + j];
            ga[i * k + kk] += acc;
          }
        }
      }
      if (bi->requires_grad) {
        double* gb = bi->grad_ref().data() + bb * k * n;
        const double* ad = ai->data.data() + bb * m * k;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = ad[i * k + kk];
            for (std::size_t j = 0; j < n; ++j) gb[kk * n + j] += av * go[i * n + j];
          }
        }
      }
    }
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(1) ||
      w.dim(0) != b.dim(0)) {
    throw DimensionError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                         shape_str(w.shape()) + " b" + shape_str(b.shape()));
  }
  const std::size_t rows = x.dim(0), in = x.dim(1), outw = w.dim(0);
  const bool rec = wants_grad({&x, &w, &b});
  Tensor out = Tensor::zeros({rows, outw});
  FlopCounter::add(static_cast<std::uint64_t>(rows) * in * outw);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xrow = x.data().data() + r * in;
    double* orow = out.data().data() + r * outw;
    for (std::size_t o = 0; o < outw; ++o) {
      const double* wrow = w.data().data() + o * in;
      double acc = b.data()[o];
      for (std::size_t i = 0; i < in; ++i) acc += xrow[i] * wrow[i];
      orow[o] = acc;
    }
  }
  auto xi = x.impl(), wi = w.impl(), bi2 = b.impl(), oi = out.impl();
  finish("linear", out, rec, [xi, wi, bi2, oi, rows, in, outw] {
    const std::vector<double>& go = oi->grad;
    if (xi->requires_grad) {
      auto& gx = xi->grad_ref();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < outw; ++o) {
          const double gv = go[r * outw + o];
          const double* wrow = wi->data.data() + o * in;
          double* gxrow = gx.data() + r * in;
          for (std::size_t i = 0; i < in; ++i) gxrow[i] += gv * wrow[i];
        }
      }
    }
    if (wi->requires_grad) {
      auto& gw = wi->grad_ref();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xrow = xi->data.data() + r * in;
        for (std::size_t o = 0; o < outw; ++o) {
          const double gv = go[r * outw + o];
          double* gwrow = gw.data() + o * in;
          for (std::size_t i = 0; i < in; ++i) gwrow[i] += gv * xrow[i];
        }
      }
    }
    if (bi2->requires_grad) {
      auto& gb = bi2->grad_ref();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < outw; ++o) gb[o] += go[r * outw + o];
      }
    }
  });
  return out;
}

Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose2d: expected rank 2, got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data()[j * m + i] = x.data()[i * n + j];
  }
  auto xi = x.impl(), oi = out.impl();
  finish("transpose2d", out, rec, [xi, oi, m, n] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += oi->grad[j * m + i];
    }
  });
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  std::size_t outer, n, inner;
  axis_extents("softmax", x.shape(), axis, outer, n, inner);
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = x.data()[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x.data()[base + i * inner]);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(x.data()[base + i * inner] - mx);
        out.data()[base + i * inner] = e;
        sum += e;
      }
      for (std::size_t i = 0; i < n; ++i) out.data()[base + i * inner] /= sum;
    }
  }
  auto xi = x.impl(), oi = out.impl();
  finish("softmax", out, rec, [xi, oi, outer, n, inner] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          dot += oi->grad[base + i * inner] * oi->data[base + i * inner];
        }
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t idx = base + i * inner;
          g[idx] += oi->data[idx] * (oi->grad[idx] - dot);
        }
      }
    }
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  if (x.rank() < 1) throw DimensionError("layer_norm: empty shape");
  const std::size_t d = x.shape().back();
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != d || beta.dim(0) != d) {
    throw DimensionError("layer_norm: scale/shift width must be " + std::to_string(d));
  }
  constexpr double kEps = 1e-5;
  const std::size_t rows = x.numel() / d;
  const bool rec = wants_grad({&x, &gamma, &beta});
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> inv_std(rows), means(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kEps);
    means[r] = mean;
    inv_std[r] = inv;
    double* orow = out.data().data() + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      orow[i] = (xr[i] - mean) * inv * gamma.data()[i] + beta.data()[i];
    }
  }
  auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
  finish("layer_norm", out, rec, [xi, gi, bi, oi, rows, d, means, inv_std] {
    const std::vector<double>& go = oi->grad;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = xi->data.data() + r * d;
      const double* gr = go.data() + r * d;
      const double inv = inv_std[r];
      const double mean = means[r];
      if (gi->requires_grad || bi->requires_grad) {
        for (std::size_t i = 0; i < d; ++i) {
          const double xhat = (xr[i] - mean) * inv;
          if (gi->requires_grad) gi->grad_ref()[i] += gr[i] * xhat;
          if (bi->requires_grad) bi->grad_ref()[i] += gr[i];
        }
      }
      if (xi->requires_grad) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double dxhat = gr[i] * gi->data[i];
          const double xhat = (xr[i] - mean) * inv;
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        auto& gx = xi->grad_ref();
        const double nd = static_cast<double>(d);
        for (std::size_t i = 0; i < d; ++i) {
          const double dxhat = gr[i] * gi->data[i];
          const double xhat = (xr[i] - mean) * inv;
          gx[r * d + i] += inv * (dxhat - sum_dxhat / nd - xhat * sum_dxhat_xhat / nd);
        }
      }
    }
  });
  return out;
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  std::size_t outer, n, inner;
  axis_extents("mean_axis", x.shape(), axis, outer, n, inner);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += x.data()[o * n * inner + i * inner + in];
      out.data()[o * inner + in] = acc / static_cast<double>(n);
    }
  }
  auto xi = x.impl(), oi = out.impl();
  finish("mean_axis", out, rec, [xi, oi, outer, n, inner] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const double gv = oi->grad[o * inner + in] * scale;
        for (std::size_t i = 0; i < n; ++i) g[o * n * inner + i * inner + in] += gv;
      }
    }
  });
  return out;
}

Tensor sum_all(const Tensor& x) {
  const bool rec = wants_grad({&x});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  auto xi = x.impl(), oi = out.impl();
  finish("sum_all", out, rec, [xi, oi] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    const double gv = oi->grad[0];
    for (double& v : g) v += gv;
  });
  return out;
}

Tensor mean_all(const Tensor& x) {
  const bool rec = wants_grad({&x});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double n = static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(acc / n);
  auto xi = x.impl(), oi = out.impl();
  finish("mean_all", out, rec, [xi, oi, n] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    const double gv = oi->grad[0] / n;
    for (double& v : g) v += gv;
  });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range");
  }
  Shape out_shape = first;
  std::size_t total_axis = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis && p.shape()[i] != first[i]) {
        throw DimensionError("concat: shape mismatch at axis " + std::to_string(i));
      }
    }
    total_axis += p.shape()[axis];
  }
  out_shape[axis] = total_axis;
  bool rec = false;
  for (const Tensor& p : parts) rec = rec || wants_grad({&p});

  std::size_t outer, n_out, inner;
  axis_extents("concat", out_shape, axis, outer, n_out, inner);
  Tensor out = Tensor::zeros(out_shape);
  std::vector<std::shared_ptr<TensorImpl>> impls;
  std::vector<std::size_t> axis_sizes;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t pn = p.shape()[axis];
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = p.data().data() + o * pn * inner;
      double* dst = out.data().data() + (o * n_out + offset) * inner;
      std::memcpy(dst, src, pn * inner * sizeof(double));
    }
    offset += pn;
    impls.push_back(p.impl());
    axis_sizes.push_back(pn);
  }
  auto oi = out.impl();
  finish("concat", out, rec, [impls, axis_sizes, oi, outer, n_out, inner] {
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < impls.size(); ++pi) {
      const std::size_t pn = axis_sizes[pi];
      if (impls[pi]->requires_grad) {
        auto& g = impls[pi]->grad_ref();
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = oi->grad.data() + (o * n_out + off) * inner;
          double* dst = g.data() + o * pn * inner;
          for (std::size_t i = 0; i < pn * inner; ++i) dst[i] += src[i];
        }
      }
      off += pn;
    }
  });
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
  }
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::from_data(std::move(new_shape), x.data());
  auto xi = x.impl(), oi = out.impl();
  finish("reshape", out, rec, [xi, oi] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
  });
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  if (x.rank() != 2) throw DimensionError("slice_rows: expected rank 2");
  if (start + count > x.dim(0) || count == 0) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + "," +
                         std::to_string(start + count) + ") out of range");
  }
  const std::size_t cols = x.dim(1);
  const bool rec = wants_grad({&x});
  Tensor out = Tensor::zeros({count, cols});
  std::memcpy(out.data().data(), x.data().data() + start * cols, count * cols * sizeof(double));
  auto xi = x.impl(), oi = out.impl();
  finish("slice_rows", out, rec, [xi, oi, start, count, cols] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t i = 0; i < count * cols; ++i) g[start * cols + i] += oi->grad[i];
  });
  return out;
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  if (x.rank() != 2 || row.rank() != 2 || row.dim(0) != 1 || row.dim(1) != x.dim(1)) {
    throw DimensionError("add_row: need x(rows,cols) and row(1,cols), got " +
                         shape_str(x.shape()) + " and " + shape_str(row.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const bool rec = wants_grad({&x, &row});
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out.data()[r * cols + c] = x.data()[r * cols + c] + row.data()[c];
    }
  }
  auto xi = x.impl(), ri = row.impl(), oi = out.impl();
  finish("add_row", out, rec, [xi, ri, oi, rows, cols] {
    if (xi->requires_grad) {
      auto& g = xi->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
    }
    if (ri->requires_grad) {
      auto& g = ri->grad_ref();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) g[c] += oi->grad[r * cols + c];
      }
    }
  });
  return out;
}

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("bilinear_resize: expected (H,W) or (C,H,W), got " +
                         shape_str(x.shape()));
  }
  if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_resize: empty output");
  const std::size_t C = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t H = x.rank() == 3 ? x.dim(1) : x.dim(0);
  const std::size_t W = x.rank() == 3 ? x.dim(2) : x.dim(1);
  const ResizeAxis ay = resize_axis(H, out_h), ax = resize_axis(W, out_w);
  const bool rec = wants_grad({&x});
  Shape out_shape = x.rank() == 3 ? Shape{C, out_h, out_w} : Shape{out_h, out_w};
  Tensor out = Tensor::zeros(out_shape);
  FlopCounter::add(static_cast<std::uint64_t>(C) * out_h * out_w * 4);
  for (std::size_t c = 0; c < C; ++c) {
    const double* src = x.data().data() + c * H * W;
    double* dst = out.data().data() + c * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const std::size_t y0 = ay.lo[oy], y1 = ay.hi[oy];
      const double wy = ay.w[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const std::size_t x0 = ax.lo[ox], x1 = ax.hi[ox];
        const double wx = ax.w[ox];
        dst[oy * out_w + ox] = (1.0 - wy) * ((1.0 - wx) * src[y0 * W + x0] + wx * src[y0 * W + x1]) +
                               wy * ((1.0 - wx) * src[y1 * W + x0] + wx * src[y1 * W + x1]);
      }
    }
  }
  auto xi = x.impl(), oi = out.impl();
  finish("bilinear_resize", out, rec, [xi, oi, ay, ax, C, H, W, out_h, out_w] {
    if (!xi->requires_grad) return;
    auto& g = xi->grad_ref();
    for (std::size_t c = 0; c < C; ++c) {
      double* gsrc = g.data() + c * H * W;
      const double* gdst = oi->grad.data() + c * out_h * out_w;
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const std::size_t y0 = ay.lo[oy], y1 = ay.hi[oy];
        const double wy = ay.w[oy];
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const std::size_t x0 = ax.lo[ox], x1 = ax.hi[ox];
          const double wx = ax.w[ox];
          const double gv = gdst[oy * out_w + ox];
          gsrc[y0 * W + x0] += gv * (1.0 - wy) * (1.0 - wx);
          gsrc[y0 * W + x1] += gv * (1.0 - wy) * wx;
          gsrc[y1 * W + x0] += gv * wy * (1.0 - wx);
          gsrc[y1 * W + x1] += gv * wy * wx;
        }
      }
    }
  });
  return out;
}

Tensor scale_channels(const Tensor& f, const Tensor& m) {
  if (f.rank() != 3 || m.rank() != 2 || f.dim(1) != m.dim(0) || f.dim(2) != m.dim(1)) {
    throw DimensionError("scale_channels: need f(C,H,W) and m(H,W), got " +
                         shape_str(f.shape()) + " and " + shape_str(m.shape()));
  }
  const std::size_t C = f.dim(0), HW = f.dim(1) * f.dim(2);
  const bool rec = wants_grad({&f, &m});
  Tensor out = Tensor::zeros(f.shape());
  FlopCounter::add(static_cast<std::uint64_t>(C) * HW);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t p = 0; p < HW; ++p) {
      out.data()[c * HW + p] = f.data()[c * HW + p] * m.data()[p];
    }
  }
  auto fi = f.impl(), mi = m.impl(), oi = out.impl();
  finish("scale_channels", out, rec, [fi, mi, oi, C, HW] {
    if (fi->requires_grad) {
      auto& g = fi->grad_ref();
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t p = 0; p < HW; ++p) g[c * HW + p] += oi->grad[c * HW + p] * mi->data[p];
      }
    }
    if (mi->requires_grad) {
      auto& g = mi->grad_ref();
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t p = 0; p < HW; ++p) g[p] += oi->grad[c * HW + p] * fi->data[c * HW + p];
      }
    }
  });
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride) {
  if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1 || w.dim(1) != x.dim(0) ||
      w.dim(0) != b.dim(0)) {
    throw DimensionError("conv2d: incompatible shapes x" + shape_str(x.shape()) + " w" +
                         shape_str(w.shape()));
  }
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (H < kh || W < kw) throw DimensionError("conv2d: kernel larger than input");
  const std::size_t Ho = (H - kh) / stride + 1, Wo = (W - kw) / stride + 1;
  const bool rec = wants_grad({&x, &w, &b});
  Tensor out = Tensor::zeros({Co, Ho, Wo});
  FlopCounter::add(static_cast<std::uint64_t>(Co) * Ho * Wo * Ci * kh * kw);
  for (std::size_t co = 0; co < Co; ++co) {
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        double acc = b.data()[co];
        for (std::size_t ci = 0; ci < Ci; ++ci) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const double* xrow = x.data().data() + (ci * H + oy * stride + ky) * W + ox * stride;
            const double* wrow = w.data().data() + ((co * Ci + ci) * kh + ky) * kw;
            for (std::size_t kx = 0; kx < kw; ++kx) acc += xrow[kx] * wrow[kx];
          }
        }
        out.data()[(co * Ho + oy) * Wo + ox] = acc;
      }
    }
  }
  auto xi = x.impl(), wi = w.impl(), bi = b.impl(), oi = out.impl();
  finish("conv2d", out, rec, [xi, wi, bi, oi, Ci, H, W, Co, kh, kw, Ho, Wo, stride] {
    const std::vector<double>& go = oi->grad;
    for (std::size_t co = 0; co < Co; ++co) {
      for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          const double gv = go[(co * Ho + oy) * Wo + ox];
          if (bi->requires_grad) bi->grad_ref()[co] += gv;
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const std::size_t xbase = (ci * H + oy * stride + ky) * W + ox * stride;
              const std::size_t wbase = ((co * Ci + ci) * kh + ky) * kw;
              if (xi->requires_grad) {
                auto& gx = xi->grad_ref();
                for (std::size_t kx = 0; kx < kw; ++kx) gx[xbase + kx] += gv * wi->data[wbase + kx];
              }
              if (wi->requires_grad) {
                auto& gw = wi->grad_ref();
                for (std::size_t kx = 0; kx < kw; ++kx) gw[wbase + kx] += gv * xi->data[xbase + kx];
              }
            }
          }
        }
      }
    }
  });
  return out;
}

Tensor chw_to_mat(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("chw_to_mat: expected (C,H,W)");
  const std::size_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
  return transpose2d(reshape(x, {C, HW}));
}

Tensor mat_to_chw(const Tensor& x, std::size_t h, std::size_t w) {
  if (x.rank() != 2 || x.dim(0) != h * w) {
    throw DimensionError("mat_to_chw: rows must equal h*w");
  }
  return reshape(transpose2d(x), {x.dim(1), h, w});
}

}  // namespace pixelseg
