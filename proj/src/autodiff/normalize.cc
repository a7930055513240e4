// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <string>

#include "sepkit/autodiff/ops.h"
#include "sepkit/error.h"

namespace sepkit::ad {

namespace {

// Maps (channel, frame) to a statistics group.
struct Grouping {
  NormKind kind;
  int64_t channels;
  int64_t frames;

  int64_t count() const {
    switch (kind) {
      case NormKind::kGlobalLayer: return 1;
      case NormKind::kChannelLayer: return frames;
      case NormKind::kBatch: return channels;
    }
    return 1;
  }
  int64_t group(int64_t c, int64_t t) const {
    switch (kind) {
      case NormKind::kGlobalLayer: return 0;
      case NormKind::kChannelLayer: return t;
      case NormKind::kBatch: return c;
    }
    return 0;
  }
  double size() const { return static_cast<double>(channels * frames / count()); }
};

}  // namespace

Tensor Normalize(const Tensor& x, NormKind kind, const Tensor& scale, const Tensor& shift,
                 bool training, BatchNormState* state) {
  if (x.ndim() != 2) throw DimensionError("normalize: input must be [C x T]");
  const int64_t channels = x.dim(0), frames = x.dim(1);
  if (scale.numel() != channels || shift.numel() != channels) {
    throw DimensionError("normalize: affine parameters do not match " +
                         std::to_string(channels) + " channels");
  }
  const bool use_running = (kind == NormKind::kBatch && !training);
  if (kind == NormKind::kBatch && state != nullptr) {
    if (state->running_mean.empty()) {
      state->running_mean.assign(static_cast<size_t>(channels), 0.0);
      state->running_var.assign(static_cast<size_t>(channels), 1.0);
    }
    if (static_cast<int64_t>(state->running_mean.size()) != channels) {
      throw DimensionError("normalize: running statistics do not match channel count");
    }
  }
  if (use_running && state == nullptr) {
    throw UsageError("normalize: batch norm inference needs running statistics");
  }

  const Grouping grouping{kind, channels, frames};
  const int64_t groups = grouping.count();
  const auto& xv = x.values();
  std::vector<double> mean(static_cast<size_t>(groups), 0.0);
  std::vector<double> var(static_cast<size_t>(groups), 0.0);
  if (use_running) {
    mean = state->running_mean;
    var = state->running_var;
  } else {
    for (int64_t c = 0; c < channels; ++c) {
      for (int64_t t = 0; t < frames; ++t) mean[grouping.group(c, t)] += xv[c * frames + t];
    }
    for (double& m : mean) m /= grouping.size();
    for (int64_t c = 0; c < channels; ++c) {
      for (int64_t t = 0; t < frames; ++t) {
        const int64_t g = grouping.group(c, t);
        const double d = xv[c * frames + t] - mean[g];
        var[g] += d * d;
      }
    }
    for (double& v : var) v /= grouping.size();
    if (kind == NormKind::kBatch && training && state != nullptr) {
      const double n = grouping.size();
      const double unbias = n > 1 ? n / (n - 1) : 1.0;
      for (int64_t c = 0; c < channels; ++c) {
        state->running_mean[c] =
            (1.0 - state->momentum) * state->running_mean[c] + state->momentum * mean[c];
        state->running_var[c] =
            (1.0 - state->momentum) * state->running_var[c] + state->momentum * var[c] * unbias;
      }
    }
  }
  std::vector<double> inv_std(var.size());
  for (size_t g = 0; g < var.size(); ++g) inv_std[g] = 1.0 / std::sqrt(var[g] + kNormEpsilon);

  std::vector<double> xhat(xv.size());
  std::vector<double> y(xv.size());
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t t = 0; t < frames; ++t) {
      const int64_t i = c * frames + t;
      const int64_t g = grouping.group(c, t);
      xhat[i] = (xv[i] - mean[g]) * inv_std[g];
      y[i] = xhat[i] * scale.values()[c] + shift.values()[c];
    }
  }
  for (size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      throw NumericError("normalize: non-finite output at flat index " + std::to_string(i));
    }
  }
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  const bool needs = Tape::Active() != nullptr &&
                     (x.requires_grad() || scale.requires_grad() || shift.requires_grad());
  if (!needs) return out;

  out.set_requires_grad(true);
  auto xi = x.impl(), si = scale.impl(), bi = shift.impl(), oi = out.impl();
  Tape::Active()->Record("normalize", [=, xhat = std::move(xhat),
                                       inv_std = std::move(inv_std)]() {
    if (oi->grad.empty()) return;
    const auto& g = oi->grad;
    double* gs = si->requires_grad ? si->EnsureGrad() : nullptr;
    double* gb = bi->requires_grad ? bi->EnsureGrad() : nullptr;
    double* gx = xi->requires_grad ? xi->EnsureGrad() : nullptr;
    for (int64_t c = 0; c < channels; ++c) {
      double as = 0.0, ab = 0.0;
      for (int64_t t = 0; t < frames; ++t) {
        const int64_t i = c * frames + t;
        as += g[i] * xhat[i];
        ab += g[i];
      }
      if (gs) gs[c] += as;
      if (gb) gb[c] += ab;
    }
    if (!gx) return;
    if (use_running) {
      for (int64_t c = 0; c < channels; ++c) {
        for (int64_t t = 0; t < frames; ++t) {
          const int64_t i = c * frames + t;
          gx[i] += g[i] * si->data[c] * inv_std[grouping.group(c, t)];
        }
      }
      return;
    }
    // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)) per group.
    std::vector<double> m1(static_cast<size_t>(groups), 0.0);
    std::vector<double> m2(static_cast<size_t>(groups), 0.0);
    for (int64_t c = 0; c < channels; ++c) {
      for (int64_t t = 0; t < frames; ++t) {
        const int64_t i = c * frames + t;
        const int64_t grp = grouping.group(c, t);
        const double dxhat = g[i] * si->data[c];
        m1[grp] += dxhat;
        m2[grp] += dxhat * xhat[i];
      }
    }
    const double n = grouping.size();
    for (int64_t c = 0; c < channels; ++c) {
      for (int64_t t = 0; t < frames; ++t) {
        const int64_t i = c * frames + t;
        const int64_t grp = grouping.group(c, t);
        const double dxhat = g[i] * si->data[c];
        gx[i] += inv_std[grp] * (dxhat - m1[grp] / n - xhat[i] * m2[grp] / n);
      }
    }
  });
  return out;
}

}  // namespace sepkit::ad
