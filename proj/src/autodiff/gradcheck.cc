// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/autodiff/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sepkit/error.h"

namespace sepkit::ad {

double RelativeError(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult CheckGradient(const std::function<Tensor()>& loss_fn, Tensor wrt,
                              const GradCheckOptions& options) {
  if (!wrt.requires_grad()) throw UsageError("gradcheck: tensor does not require grad");
  std::vector<double> analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    wrt.zero_grad();
    Tensor loss = loss_fn();
    tape.Backward(loss);
    analytic = wrt.grad();
  }
  wrt.zero_grad();

  std::vector<int64_t> coords(static_cast<size_t>(wrt.numel()));
  std::iota(coords.begin(), coords.end(), 0);
  if (options.max_coords > 0 && options.max_coords < wrt.numel()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<size_t>(options.max_coords));
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  std::span<double> values = wrt.mutable_data();
  for (int64_t i : coords) {
    const double saved = values[i];
    values[i] = saved + options.step;
    const double plus = loss_fn().item();
    values[i] = saved - options.step;
    const double minus = loss_fn().item();
    values[i] = saved;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double err = RelativeError(analytic[i], numeric, options.abs_floor);
    if (err > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      result.worst_index = i;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace sepkit::ad
