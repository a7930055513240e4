// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "sepkit/autodiff/tensor.h"

namespace sepkit::ad {

struct GradCheckOptions {
  double step = 1e-4;
  // Coordinates with |analytic| and |numeric| both below this are compared
  // against it instead of their own magnitude.
  double abs_floor = 1e-7;
  // 0 checks every coordinate; otherwise a seeded random subset.
  int64_t max_coords = 0;
  uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  int64_t worst_index = -1;
  int64_t checked = 0;
};

// Compares the tape gradient of `loss_fn` w.r.t. `wrt` against central
// finite differences. `loss_fn` must rebuild the graph from scratch on each
// call and return a scalar.
GradCheckResult CheckGradient(const std::function<Tensor()>& loss_fn, Tensor wrt,
                              const GradCheckOptions& options = {});

double RelativeError(double analytic, double numeric, double abs_floor);

}  // namespace sepkit::ad
