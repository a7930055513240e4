// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sepkit/autodiff/tensor.h"

namespace sepkit::ad {

// A trainable tensor plus its Adam moment accumulators.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  int64_t step = 0;

  Parameter() = default;
  Parameter(std::string param_name, Tensor init);

  const Tensor& tensor() const { return value; }
  void ZeroGrad() { value.zero_grad(); }
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update applied in place to every parameter.
void AdamStep(std::span<Parameter* const> params, const AdamOptions& options);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
Tensor FanInUniform(Shape shape, int64_t fan_in, std::mt19937_64& rng);

}  // namespace sepkit::ad
