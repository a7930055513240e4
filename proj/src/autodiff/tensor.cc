// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/autodiff/tensor.h"

#include <sstream>

#include "sepkit/error.h"

namespace sepkit::ad {

namespace {
thread_local Tape* active_tape = nullptr;
}  // namespace

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw DimensionError("non-positive extent in shape " + ShapeToString(shape));
    n *= d;
  }
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

double* TensorImpl::EnsureGrad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad.data();
}

Tensor Tensor::Zeros(Shape shape) { return Full(std::move(shape), 0.0); }

Tensor Tensor::Full(Shape shape, double value) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(static_cast<size_t>(NumElements(shape)), value);
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data) {
  if (NumElements(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError("shape " + ShapeToString(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

Tensor Tensor::FromData(Shape shape, std::span<const double> data) {
  return FromData(std::move(shape), std::vector<double>(data.begin(), data.end()));
}

Tensor Tensor::Scalar(double value) { return FromData({1}, std::vector<double>{value}); }

int64_t Tensor::dim(int axis) const {
  const int n = ndim();
  if (axis < 0) axis += n;
  if (axis < 0 || axis >= n) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         ShapeToString(shape()));
  }
  return impl_->shape[static_cast<size_t>(axis)];
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + ShapeToString(shape()));
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
  return impl_->grad;
}

Tensor Tensor::Clone() const {
  auto impl = std::make_shared<TensorImpl>(*impl_);
  impl->grad.clear();
  return Tensor(std::move(impl));
}

Tensor Tensor::Detach() const {
  Tensor t = Clone();
  t.impl_->requires_grad = false;
  return t;
}

void Tape::Record(std::string_view op, std::function<void()> backward) {
  nodes_.push_back(Node{std::string(op), std::move(backward)});
}

void Tape::Backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward requires a scalar loss, got " +
                     (loss.defined() ? ShapeToString(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;
  loss.impl()->EnsureGrad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->backward();
    ++visits_;
  }
}

void Tape::Clear() {
  nodes_.clear();
  visits_ = 0;
}

Tape* Tape::Active() { return active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }

Tape::Scope::~Scope() { active_tape = previous_; }

void Backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward requires a scalar loss");
  }
  if (!loss.requires_grad()) return;
  if (active_tape == nullptr) throw UsageError("backward without an active tape");
  active_tape->Backward(loss);
}

}  // namespace sepkit::ad
