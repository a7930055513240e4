// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/autodiff/optim.h"

#include <cmath>

#include "sepkit/error.h"

namespace sepkit::ad {

Parameter::Parameter(std::string param_name, Tensor init)
    : name(std::move(param_name)), value(std::move(init)) {
  value.set_requires_grad(true);
  first_moment.assign(static_cast<size_t>(value.numel()), 0.0);
  second_moment.assign(static_cast<size_t>(value.numel()), 0.0);
}

void AdamStep(std::span<Parameter* const> params, const AdamOptions& o) {
  for (Parameter* p : params) {
    const std::vector<double> g = p->value.grad();
    p->step += 1;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(p->step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(p->step));
    std::span<double> w = p->value.mutable_data();
    for (size_t i = 0; i < w.size(); ++i) {
      p->first_moment[i] = o.beta1 * p->first_moment[i] + (1.0 - o.beta1) * g[i];
      p->second_moment[i] = o.beta2 * p->second_moment[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = p->first_moment[i] / bc1;
      const double v_hat = p->second_moment[i] / bc2;
      w[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
    for (double v : w) {
      if (!std::isfinite(v)) throw NumericError("adam: parameter " + p->name + " diverged");
    }
  }
}

Tensor FanInUniform(Shape shape, int64_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::Zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

}  // namespace sepkit::ad
