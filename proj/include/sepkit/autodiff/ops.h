// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sepkit/autodiff/tensor.h"

// Differentiable primitives. Every op checks its output for NaN/Inf and
// throws NumericError instead of propagating non-finite values. When a tape
// is active and any input requires grad, the op records its backward.

namespace sepkit::ad {

struct Conv1dOptions {
  int64_t stride = 1;
  int64_t dilation = 1;
  int64_t pad_left = 0;
  int64_t pad_right = 0;
};

// input [C_in x T], kernels [C_out x C_in x K] -> [C_out x T'].
Tensor Conv1d(const Tensor& input, const Tensor& kernels, const Conv1dOptions& options = {});

// Per-channel convolution: input [C x T], kernels [C x 1 x K], stride 1.
Tensor DepthwiseConv1d(const Tensor& input, const Tensor& kernels, int64_t dilation,
                       int64_t pad_left, int64_t pad_right);

// Adjoint of Conv1d: input [C_in x T], kernels [C_in x C_out x K] ->
// [C_out x (T-1)*stride + K]. Overlapping kernel copies are summed.
Tensor ConvTranspose1d(const Tensor& input, const Tensor& kernels, int64_t stride);

Tensor Relu(const Tensor& x);
// alpha holds one slope per channel (axis 0).
Tensor Prelu(const Tensor& x, const Tensor& alpha);
Tensor Sigmoid(const Tensor& x);

// Binary ops take equal shapes, or one operand with a single element.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
// Throws NumericError on an exact zero in the divisor.
Tensor Div(const Tensor& a, const Tensor& b);

Tensor MulScalar(const Tensor& x, double c);
Tensor AddScalar(const Tensor& x, double c);

// sqrt'(0) is taken as 0 so silent bins do not poison the backward pass.
Tensor Sqrt(const Tensor& x);
Tensor Square(const Tensor& x);
Tensor Cos(const Tensor& x);
Tensor Sin(const Tensor& x);
// Natural log; throws NumericError for non-positive input.
Tensor Log(const Tensor& x);
// Elementwise atan2(im, re); the gradient at (0, 0) is taken as 0.
Tensor Atan2(const Tensor& im, const Tensor& re);

Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);

// Channel-affine broadcasts: x [C x ...] with v [C].
Tensor MulChannel(const Tensor& x, const Tensor& v);
Tensor AddChannel(const Tensor& x, const Tensor& v);
// x [... x L] times v [L] broadcast over the leading axes.
Tensor MulTrailing(const Tensor& x, const Tensor& v);

Tensor Reshape(const Tensor& x, Shape shape);
// Concatenation along axis 0; trailing extents must agree.
Tensor Concat(std::span<const Tensor> parts);
// Rows [begin, begin + count) along axis 0.
Tensor SliceRows(const Tensor& x, int64_t begin, int64_t count);
// Samples [begin, begin + count) along the last axis.
Tensor SliceLast(const Tensor& x, int64_t begin, int64_t count);
// Zero padding along the last axis.
Tensor PadLast(const Tensor& x, int64_t left, int64_t right);

enum class NormKind { kBatch, kGlobalLayer, kChannelLayer };

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
};

inline constexpr double kNormEpsilon = 1e-5;

// x [C x T]; scale/shift [C].
//   kGlobalLayer: statistics over all (c, t).
//   kChannelLayer: statistics over c for each t.
//   kBatch: statistics over t for each c (batch of one). In training mode
//   batch statistics are used and `state` running statistics are updated;
//   otherwise the running statistics in `state` are used.
Tensor Normalize(const Tensor& x, NormKind kind, const Tensor& scale, const Tensor& shift,
                 bool training, BatchNormState* state = nullptr);

}  // namespace sepkit::ad
