// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/autodiff/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "sepkit/error.h"

namespace sepkit::ad {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

bool NeedsGrad(std::initializer_list<const Tensor*> inputs) {
  if (Tape::Active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void CheckFinite(std::string_view op, const std::vector<double>& values) {
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(op) + ": non-finite output at flat index " +
                         std::to_string(i));
    }
  }
}

Tensor Finish(std::string_view op, Shape shape, std::vector<double> data) {
  CheckFinite(op, data);
  return Tensor::FromData(std::move(shape), std::move(data));
}

// Records `backward` on the active tape; the closure only runs when the
// output actually received a gradient.
template <typename Fn>
void Record(std::string_view op, Tensor& out, Fn&& backward) {
  out.set_requires_grad(true);
  ImplPtr oi = out.impl();
  Tape::Active()->Record(op, [oi, fn = std::forward<Fn>(backward)]() {
    if (oi->grad.empty()) return;
    fn(oi->grad);
  });
}

double* GradOf(const ImplPtr& impl) {
  return impl->requires_grad ? impl->EnsureGrad() : nullptr;
}

void RequireRank(const Tensor& t, int rank, std::string_view op, std::string_view what) {
  if (t.ndim() != rank) {
    throw DimensionError(std::string(op) + ": " + std::string(what) + " must be rank " +
                         std::to_string(rank) + ", got " + ShapeToString(t.shape()));
  }
}

// Elementwise unary op with derivative expressed through (x, y).
template <typename F, typename D>
Tensor Unary(std::string_view op, const Tensor& x, F f, D dfdx) {
  std::vector<double> y(x.values().size());
  const auto& xv = x.values();
  for (size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  Tensor out = Finish(op, x.shape(), std::move(y));
  if (NeedsGrad({&x})) {
    ImplPtr xi = x.impl();
    ImplPtr yi = out.impl();
    Record(op, out, [xi, yi, dfdx](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      if (!gx) return;
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xi->data[i], yi->data[i]);
    });
  }
  return out;
}

enum class BinaryKind { kAdd, kSub, kMul, kDiv };

const char* BinaryName(BinaryKind kind) {
  switch (kind) {
    case BinaryKind::kAdd: return "add";
    case BinaryKind::kSub: return "sub";
    case BinaryKind::kMul: return "mul";
    case BinaryKind::kDiv: return "div";
  }
  return "?";
}

Tensor Binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const char* op = BinaryName(kind);
  const int64_t na = a.numel();
  const int64_t nb = b.numel();
  if (a.shape() != b.shape() && na != 1 && nb != 1) {
    throw DimensionError(std::string(op) + ": shape mismatch " + ShapeToString(a.shape()) +
                         " vs " + ShapeToString(b.shape()));
  }
  const Shape& shape = (na >= nb) ? a.shape() : b.shape();
  const int64_t n = std::max(na, nb);
  const auto& av = a.values();
  const auto& bv = b.values();
  auto ai = [&](int64_t i) { return av[na == 1 ? 0 : static_cast<size_t>(i)]; };
  auto bi = [&](int64_t i) { return bv[nb == 1 ? 0 : static_cast<size_t>(i)]; };
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    switch (kind) {
      case BinaryKind::kAdd: y[i] = ai(i) + bi(i); break;
      case BinaryKind::kSub: y[i] = ai(i) - bi(i); break;
      case BinaryKind::kMul: y[i] = ai(i) * bi(i); break;
      case BinaryKind::kDiv:
        if (bi(i) == 0.0) {
          throw NumericError(std::string("div: division by zero at divisor index ") +
                             std::to_string(nb == 1 ? 0 : i) + " of " +
                             ShapeToString(b.shape()));
        }
        y[i] = ai(i) / bi(i);
        break;
    }
  }
  Tensor out = Finish(op, shape, std::move(y));
  if (NeedsGrad({&a, &b})) {
    ImplPtr ap = a.impl();
    ImplPtr bp = b.impl();
    Record(op, out, [ap, bp, kind, na, nb, n](const std::vector<double>& g) {
      double* ga = GradOf(ap);
      double* gb = GradOf(bp);
      const auto& av = ap->data;
      const auto& bv = bp->data;
      for (int64_t i = 0; i < n; ++i) {
        const size_t ia = na == 1 ? 0 : static_cast<size_t>(i);
        const size_t ib = nb == 1 ? 0 : static_cast<size_t>(i);
        double da = 0.0, db = 0.0;
        switch (kind) {
          case BinaryKind::kAdd: da = 1.0; db = 1.0; break;
          case BinaryKind::kSub: da = 1.0; db = -1.0; break;
          case BinaryKind::kMul: da = bv[ib]; db = av[ia]; break;
          case BinaryKind::kDiv:
            da = 1.0 / bv[ib];
            db = -av[ia] / (bv[ib] * bv[ib]);
            break;
        }
        if (ga) ga[ia] += g[i] * da;
        if (gb) gb[ib] += g[i] * db;
      }
    });
  }
  return out;
}

// Leading axis extent and the number of elements per leading index.
std::pair<int64_t, int64_t> SplitLeading(const Tensor& x) {
  const int64_t c = x.dim(0);
  return {c, x.numel() / c};
}

}  // namespace

Tensor Conv1d(const Tensor& input, const Tensor& kernels, const Conv1dOptions& o) {
  RequireRank(input, 2, "conv1d", "input");
  RequireRank(kernels, 3, "conv1d", "kernels");
  const int64_t cin = input.dim(0), t_in = input.dim(1);
  const int64_t cout = kernels.dim(0), k_len = kernels.dim(2);
  if (kernels.dim(1) != cin) {
    throw DimensionError("conv1d: kernels expect " + std::to_string(kernels.dim(1)) +
                         " input channels, input has " + std::to_string(cin));
  }
  if (o.stride < 1 || o.dilation < 1 || o.pad_left < 0 || o.pad_right < 0) {
    throw UsageError("conv1d: stride/dilation must be >= 1 and padding >= 0");
  }
  const int64_t span = o.dilation * (k_len - 1) + 1;
  const int64_t padded = t_in + o.pad_left + o.pad_right;
  if (padded < span) {
    throw DimensionError("conv1d: input of length " + std::to_string(t_in) +
                         " is shorter than the kernel span " + std::to_string(span));
  }
  const int64_t t_out = (padded - span) / o.stride + 1;
  const int64_t s = o.stride, d = o.dilation, pl = o.pad_left;

  // Output index t reads input position t*s + k*d - pl for tap k.
  auto t_range = [=](int64_t k) {
    const int64_t off = k * d - pl;
    int64_t lo = off >= 0 ? 0 : (-off + s - 1) / s;
    int64_t hi = (t_in - 1 - off) >= 0 ? (t_in - 1 - off) / s + 1 : 0;
    return std::pair<int64_t, int64_t>{lo, std::min(hi, t_out)};
  };

  const auto& x = input.values();
  const auto& w = kernels.values();
  std::vector<double> y(static_cast<size_t>(cout * t_out), 0.0);
  for (int64_t co = 0; co < cout; ++co) {
    double* yrow = y.data() + co * t_out;
    for (int64_t ci = 0; ci < cin; ++ci) {
      const double* xrow = x.data() + ci * t_in;
      const double* wrow = w.data() + (co * cin + ci) * k_len;
      if (k_len == 1 || s == 1) {
        for (int64_t k = 0; k < k_len; ++k) {
          const auto [lo, hi] = t_range(k);
          const double wk = wrow[k];
          const double* xs = xrow + k * d - pl;
          for (int64_t t = lo; t < hi; ++t) yrow[t] += wk * xs[t * s];
        }
      } else {
        // Long strided kernels (analysis filter banks): contiguous dot per frame.
        for (int64_t t = 0; t < t_out; ++t) {
          const int64_t base = t * s - pl;
          int64_t k0 = base >= 0 ? 0 : (-base + d - 1) / d;
          int64_t k1 = std::min<int64_t>(k_len, (t_in - 1 - base) >= 0 ? (t_in - 1 - base) / d + 1 : 0);
          double acc = 0.0;
          for (int64_t k = k0; k < k1; ++k) acc += wrow[k] * xrow[base + k * d];
          yrow[t] += acc;
        }
      }
    }
  }
  Tensor out = Finish("conv1d", {cout, t_out}, std::move(y));
  if (NeedsGrad({&input, &kernels})) {
    ImplPtr xi = input.impl();
    ImplPtr wi = kernels.impl();
    Record("conv1d", out, [=](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      double* gw = GradOf(wi);
      const auto& x = xi->data;
      const auto& w = wi->data;
      for (int64_t co = 0; co < cout; ++co) {
        const double* grow = g.data() + co * t_out;
        for (int64_t ci = 0; ci < cin; ++ci) {
          for (int64_t k = 0; k < k_len; ++k) {
            const auto [lo, hi] = t_range(k);
            const int64_t off = ci * t_in + k * d - pl;
            const size_t widx = static_cast<size_t>((co * cin + ci) * k_len + k);
            if (gw) {
              double acc = 0.0;
              for (int64_t t = lo; t < hi; ++t) acc += grow[t] * x[off + t * s];
              gw[widx] += acc;
            }
            if (gx) {
              const double wk = w[widx];
              for (int64_t t = lo; t < hi; ++t) gx[off + t * s] += wk * grow[t];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor DepthwiseConv1d(const Tensor& input, const Tensor& kernels, int64_t dilation,
                       int64_t pad_left, int64_t pad_right) {
  RequireRank(input, 2, "depthwise_conv1d", "input");
  RequireRank(kernels, 3, "depthwise_conv1d", "kernels");
  const int64_t c = input.dim(0), t_in = input.dim(1), k_len = kernels.dim(2);
  if (kernels.dim(0) != c || kernels.dim(1) != 1) {
    throw DimensionError("depthwise_conv1d: kernels " + ShapeToString(kernels.shape()) +
                         " do not match " + std::to_string(c) + " channels");
  }
  if (dilation < 1 || pad_left < 0 || pad_right < 0) {
    throw UsageError("depthwise_conv1d: dilation must be >= 1 and padding >= 0");
  }
  const int64_t span = dilation * (k_len - 1) + 1;
  const int64_t t_out = t_in + pad_left + pad_right - span + 1;
  if (t_out < 1) throw DimensionError("depthwise_conv1d: input shorter than kernel span");
  auto t_range = [=](int64_t k) {
    const int64_t off = k * dilation - pad_left;
    const int64_t lo = std::max<int64_t>(0, -off);
    const int64_t hi = std::min<int64_t>(t_out, t_in - off);
    return std::pair<int64_t, int64_t>{lo, std::max(lo, hi)};
  };
  const auto& x = input.values();
  const auto& w = kernels.values();
  std::vector<double> y(static_cast<size_t>(c * t_out), 0.0);
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t k = 0; k < k_len; ++k) {
      const auto [lo, hi] = t_range(k);
      const double wk = w[ch * k_len + k];
      const double* xs = x.data() + ch * t_in + k * dilation - pad_left;
      double* yrow = y.data() + ch * t_out;
      for (int64_t t = lo; t < hi; ++t) yrow[t] += wk * xs[t];
    }
  }
  Tensor out = Finish("depthwise_conv1d", {c, t_out}, std::move(y));
  if (NeedsGrad({&input, &kernels})) {
    ImplPtr xi = input.impl();
    ImplPtr wi = kernels.impl();
    Record("depthwise_conv1d", out, [=](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      double* gw = GradOf(wi);
      for (int64_t ch = 0; ch < c; ++ch) {
        const double* grow = g.data() + ch * t_out;
        for (int64_t k = 0; k < k_len; ++k) {
          const auto [lo, hi] = t_range(k);
          const int64_t off = ch * t_in + k * dilation - pad_left;
          if (gw) {
            double acc = 0.0;
            for (int64_t t = lo; t < hi; ++t) acc += grow[t] * xi->data[off + t];
            gw[ch * k_len + k] += acc;
          }
          if (gx) {
            const double wk = wi->data[ch * k_len + k];
            for (int64_t t = lo; t < hi; ++t) gx[off + t] += wk * grow[t];
          }
        }
      }
    });
  }
  return out;
}

Tensor ConvTranspose1d(const Tensor& input, const Tensor& kernels, int64_t stride) {
  RequireRank(input, 2, "conv_transpose1d", "input");
  RequireRank(kernels, 3, "conv_transpose1d", "kernels");
  if (stride < 1) throw UsageError("conv_transpose1d: stride must be >= 1");
  const int64_t cin = input.dim(0), t_in = input.dim(1);
  const int64_t cout = kernels.dim(1), k_len = kernels.dim(2);
  if (kernels.dim(0) != cin) {
    throw DimensionError("conv_transpose1d: kernels expect " + std::to_string(kernels.dim(0)) +
                         " input channels, input has " + std::to_string(cin));
  }
  const int64_t t_out = (t_in - 1) * stride + k_len;
  const auto& x = input.values();
  const auto& w = kernels.values();
  std::vector<double> y(static_cast<size_t>(cout * t_out), 0.0);
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int64_t co = 0; co < cout; ++co) {
      const double* wrow = w.data() + (ci * cout + co) * k_len;
      double* yrow = y.data() + co * t_out;
      for (int64_t t = 0; t < t_in; ++t) {
        const double xv = x[ci * t_in + t];
        if (xv == 0.0) continue;
        double* dst = yrow + t * stride;
        for (int64_t k = 0; k < k_len; ++k) dst[k] += xv * wrow[k];
      }
    }
  }
  Tensor out = Finish("conv_transpose1d", {cout, t_out}, std::move(y));
  if (NeedsGrad({&input, &kernels})) {
    ImplPtr xi = input.impl();
    ImplPtr wi = kernels.impl();
    Record("conv_transpose1d", out, [=](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      double* gw = GradOf(wi);
      for (int64_t ci = 0; ci < cin; ++ci) {
        for (int64_t co = 0; co < cout; ++co) {
          const size_t wbase = static_cast<size_t>((ci * cout + co) * k_len);
          const double* wrow = wi->data.data() + wbase;
          const double* grow = g.data() + co * t_out;
          for (int64_t t = 0; t < t_in; ++t) {
            const double* gs = grow + t * stride;
            const double xv = xi->data[ci * t_in + t];
            if (gx) {
              double acc = 0.0;
              for (int64_t k = 0; k < k_len; ++k) acc += wrow[k] * gs[k];
              gx[ci * t_in + t] += acc;
            }
            if (gw && xv != 0.0) {
              for (int64_t k = 0; k < k_len; ++k) gw[wbase + k] += xv * gs[k];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor Relu(const Tensor& x) {
  return Unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor Prelu(const Tensor& x, const Tensor& alpha) {
  const auto [c, inner] = SplitLeading(x);
  if (alpha.numel() != c) {
    throw DimensionError("prelu: " + std::to_string(alpha.numel()) + " slopes for " +
                         std::to_string(c) + " channels");
  }
  const auto& xv = x.values();
  const auto& av = alpha.values();
  std::vector<double> y(xv.size());
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t i = ch * inner; i < (ch + 1) * inner; ++i) {
      y[i] = xv[i] > 0.0 ? xv[i] : av[ch] * xv[i];
    }
  }
  Tensor out = Finish("prelu", x.shape(), std::move(y));
  if (NeedsGrad({&x, &alpha})) {
    ImplPtr xi = x.impl();
    ImplPtr ai = alpha.impl();
    const int64_t cc = c, in = inner;
    Record("prelu", out, [xi, ai, cc, in](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      double* ga = GradOf(ai);
      for (int64_t ch = 0; ch < cc; ++ch) {
        double acc = 0.0;
        for (int64_t i = ch * in; i < (ch + 1) * in; ++i) {
          const double v = xi->data[i];
          if (v > 0.0) {
            if (gx) gx[i] += g[i];
          } else {
            if (gx) gx[i] += g[i] * ai->data[ch];
            acc += g[i] * v;
          }
        }
        if (ga) ga[ch] += acc;
      }
    });
  }
  return out;
}

Tensor Sigmoid(const Tensor& x) {
  return Unary(
      "sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Add(const Tensor& a, const Tensor& b) { return Binary(BinaryKind::kAdd, a, b); }
Tensor Sub(const Tensor& a, const Tensor& b) { return Binary(BinaryKind::kSub, a, b); }
Tensor Mul(const Tensor& a, const Tensor& b) { return Binary(BinaryKind::kMul, a, b); }
Tensor Div(const Tensor& a, const Tensor& b) { return Binary(BinaryKind::kDiv, a, b); }

Tensor MulScalar(const Tensor& x, double c) {
  return Unary(
      "mul_scalar", x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor AddScalar(const Tensor& x, double c) {
  return Unary(
      "add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor Sqrt(const Tensor& x) {
  for (size_t i = 0; i < x.values().size(); ++i) {
    if (x.values()[i] < 0.0) {
      throw NumericError("sqrt: negative input at flat index " + std::to_string(i));
    }
  }
  return Unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor Square(const Tensor& x) {
  return Unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor Cos(const Tensor& x) {
  return Unary(
      "cos", x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

Tensor Sin(const Tensor& x) {
  return Unary(
      "sin", x, [](double v) { return std::sin(v); },
      [](double v, double) { return std::cos(v); });
}

Tensor Log(const Tensor& x) {
  for (size_t i = 0; i < x.values().size(); ++i) {
    if (x.values()[i] <= 0.0) {
      throw NumericError("log: non-positive input at flat index " + std::to_string(i));
    }
  }
  return Unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor Atan2(const Tensor& im, const Tensor& re) {
  if (im.shape() != re.shape()) {
    throw DimensionError("atan2: shape mismatch " + ShapeToString(im.shape()) + " vs " +
                         ShapeToString(re.shape()));
  }
  std::vector<double> y(im.values().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = std::atan2(im.values()[i], re.values()[i]);
  Tensor out = Finish("atan2", im.shape(), std::move(y));
  if (NeedsGrad({&im, &re})) {
    ImplPtr ii = im.impl();
    ImplPtr ri = re.impl();
    Record("atan2", out, [ii, ri](const std::vector<double>& g) {
      double* gi = GradOf(ii);
      double* gr = GradOf(ri);
      for (size_t i = 0; i < g.size(); ++i) {
        const double a = ii->data[i], b = ri->data[i];
        const double r2 = a * a + b * b;
        if (r2 == 0.0) continue;
        if (gi) gi[i] += g[i] * b / r2;
        if (gr) gr[i] -= g[i] * a / r2;
      }
    });
  }
  return out;
}

Tensor Sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tensor out = Finish("sum", {1}, {acc});
  if (NeedsGrad({&x})) {
    ImplPtr xi = x.impl();
    Record("sum", out, [xi](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      if (!gx) return;
      for (size_t i = 0; i < xi->data.size(); ++i) gx[i] += g[0];
    });
  }
  return out;
}

Tensor Mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tensor out = Finish("mean", {1}, {acc / n});
  if (NeedsGrad({&x})) {
    ImplPtr xi = x.impl();
    Record("mean", out, [xi, n](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      if (!gx) return;
      for (size_t i = 0; i < xi->data.size(); ++i) gx[i] += g[0] / n;
    });
  }
  return out;
}

namespace {

Tensor ChannelOp(const char* op, bool multiply, const Tensor& x, const Tensor& v) {
  const auto [c, inner] = SplitLeading(x);
  if (v.numel() != c) {
    throw DimensionError(std::string(op) + ": " + std::to_string(v.numel()) +
                         " coefficients for " + std::to_string(c) + " channels");
  }
  const auto& xv = x.values();
  const auto& vv = v.values();
  std::vector<double> y(xv.size());
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t i = ch * inner; i < (ch + 1) * inner; ++i) {
      y[i] = multiply ? xv[i] * vv[ch] : xv[i] + vv[ch];
    }
  }
  Tensor out = Finish(op, x.shape(), std::move(y));
  if (NeedsGrad({&x, &v})) {
    ImplPtr xi = x.impl();
    ImplPtr vi = v.impl();
    const int64_t cc = c, in = inner;
    Record(op, out, [xi, vi, cc, in, multiply](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      double* gv = GradOf(vi);
      for (int64_t ch = 0; ch < cc; ++ch) {
        double acc = 0.0;
        for (int64_t i = ch * in; i < (ch + 1) * in; ++i) {
          if (multiply) {
            if (gx) gx[i] += g[i] * vi->data[ch];
            acc += g[i] * xi->data[i];
          } else {
            if (gx) gx[i] += g[i];
            acc += g[i];
          }
        }
        if (gv) gv[ch] += acc;
      }
    });
  }
  return out;
}

}  // namespace

Tensor MulChannel(const Tensor& x, const Tensor& v) { return ChannelOp("mul_channel", true, x, v); }
Tensor AddChannel(const Tensor& x, const Tensor& v) { return ChannelOp("add_channel", false, x, v); }

Tensor MulTrailing(const Tensor& x, const Tensor& v) {
  const int64_t len = x.dim(-1);
  if (v.numel() != len) {
    throw DimensionError("mul_trailing: vector of " + std::to_string(v.numel()) +
                         " for trailing extent " + std::to_string(len));
  }
  const int64_t rows = x.numel() / len;
  std::vector<double> y(x.values().size());
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < len; ++j) y[r * len + j] = x.values()[r * len + j] * v.values()[j];
  }
  Tensor out = Finish("mul_trailing", x.shape(), std::move(y));
  if (NeedsGrad({&x, &v})) {
    ImplPtr xi = x.impl();
    ImplPtr vi = v.impl();
    Record("mul_trailing", out, [xi, vi, rows, len](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      double* gv = GradOf(vi);
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < len; ++j) {
          const int64_t i = r * len + j;
          if (gx) gx[i] += g[i] * vi->data[j];
          if (gv) gv[j] += g[i] * xi->data[i];
        }
      }
    });
  }
  return out;
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.numel()) {
    throw DimensionError("reshape: " + ShapeToString(x.shape()) + " -> " + ShapeToString(shape));
  }
  Tensor out = Tensor::FromData(std::move(shape), x.values());
  if (NeedsGrad({&x})) {
    ImplPtr xi = x.impl();
    Record("reshape", out, [xi](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      if (!gx) return;
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

Tensor Concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat: no inputs");
  Shape shape = parts[0].shape();
  const Shape trailing(shape.begin() + 1, shape.end());
  int64_t rows = 0;
  bool needs = false;
  for (const Tensor& p : parts) {
    const Shape& ps = p.shape();
    if (ps.size() != shape.size() || !std::equal(ps.begin() + 1, ps.end(), trailing.begin())) {
      throw AlignmentError("concat: " + ShapeToString(ps) + " does not align with " +
                           ShapeToString(shape));
    }
    rows += ps[0];
    needs = needs || NeedsGrad({&p});
  }
  shape[0] = rows;
  std::vector<double> y;
  y.reserve(static_cast<size_t>(NumElements(shape)));
  for (const Tensor& p : parts) y.insert(y.end(), p.values().begin(), p.values().end());
  Tensor out = Finish("concat", shape, std::move(y));
  if (needs) {
    std::vector<ImplPtr> impls;
    for (const Tensor& p : parts) impls.push_back(p.impl());
    Record("concat", out, [impls](const std::vector<double>& g) {
      size_t offset = 0;
      for (const ImplPtr& p : impls) {
        if (double* gp = GradOf(p)) {
          for (size_t i = 0; i < p->data.size(); ++i) gp[i] += g[offset + i];
        }
        offset += p->data.size();
      }
    });
  }
  return out;
}

Tensor SliceRows(const Tensor& x, int64_t begin, int64_t count) {
  const auto [rows, inner] = SplitLeading(x);
  if (begin < 0 || count < 1 || begin + count > rows) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + ShapeToString(x.shape()));
  }
  Shape shape = x.shape();
  shape[0] = count;
  const auto first = x.values().begin() + begin * inner;
  Tensor out = Tensor::FromData(shape, std::vector<double>(first, first + count * inner));
  if (NeedsGrad({&x})) {
    ImplPtr xi = x.impl();
    const int64_t off = begin * inner;
    Record("slice_rows", out, [xi, off](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      if (!gx) return;
      for (size_t i = 0; i < g.size(); ++i) gx[off + static_cast<int64_t>(i)] += g[i];
    });
  }
  return out;
}

Tensor SliceLast(const Tensor& x, int64_t begin, int64_t count) {
  const int64_t len = x.dim(-1);
  if (begin < 0 || count < 1 || begin + count > len) {
    throw DimensionError("slice_last: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + ShapeToString(x.shape()));
  }
  const int64_t rows = x.numel() / len;
  Shape shape = x.shape();
  shape.back() = count;
  std::vector<double> y(static_cast<size_t>(rows * count));
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(x.values().begin() + r * len + begin, count, y.begin() + r * count);
  }
  Tensor out = Tensor::FromData(shape, std::move(y));
  if (NeedsGrad({&x})) {
    ImplPtr xi = x.impl();
    Record("slice_last", out, [xi, rows, len, begin, count](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      if (!gx) return;
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < count; ++j) gx[r * len + begin + j] += g[r * count + j];
      }
    });
  }
  return out;
}

Tensor PadLast(const Tensor& x, int64_t left, int64_t right) {
  if (left < 0 || right < 0) throw UsageError("pad_last: negative padding");
  const int64_t len = x.dim(-1);
  const int64_t rows = x.numel() / len;
  const int64_t out_len = len + left + right;
  Shape shape = x.shape();
  shape.back() = out_len;
  std::vector<double> y(static_cast<size_t>(rows * out_len), 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(x.values().begin() + r * len, len, y.begin() + r * out_len + left);
  }
  Tensor out = Tensor::FromData(shape, std::move(y));
  if (NeedsGrad({&x})) {
    ImplPtr xi = x.impl();
    Record("pad_last", out, [xi, rows, len, left, out_len](const std::vector<double>& g) {
      double* gx = GradOf(xi);
      if (!gx) return;
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < len; ++j) gx[r * len + j] += g[r * out_len + left + j];
      }
    });
  }
  return out;
}

}  // namespace sepkit::ad
