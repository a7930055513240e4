// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sepkit::ad {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until a gradient is accumulated into it.
  std::vector<double> grad;
  bool requires_grad = false;

  double* EnsureGrad();
};

// Dense row-major real tensor. A Tensor is a cheap handle: copies share
// storage, so treat handles obtained from ops as immutable values and use
// Clone() when an independent buffer is needed.
class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape);
  static Tensor Full(Shape shape, double value);
  static Tensor FromData(Shape shape, std::vector<double> data);
  static Tensor FromData(Shape shape, std::span<const double> data);
  static Tensor Scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  std::span<const double> data() const { return impl_->data; }
  // Writable access for leaf tensors (parameters, inputs). Never mutate a
  // tensor that was recorded on a live tape.
  std::span<double> mutable_data() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }
  double item() const;
  double operator[](int64_t i) const { return impl_->data[static_cast<size_t>(i)]; }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool value);
  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient as a dense vector; zeros when nothing was accumulated.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  Tensor Clone() const;
  // Same values, no gradient tracking.
  Tensor Detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of executed primitives. Ops record themselves on the tape
// active for the calling thread; backward replays the record in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void Record(std::string_view op, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded op's backward once.
  void Backward(const Tensor& loss);

  size_t size() const { return nodes_.size(); }
  size_t backward_visits() const { return visits_; }
  const std::string& op_name(size_t i) const { return nodes_[i].op; }
  void Clear();

  static Tape* Active();

  // Makes a tape the active one for this thread for the scope's lifetime.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  struct Node {
    std::string op;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  size_t visits_ = 0;
};

// Backward on the thread's active tape.
void Backward(const Tensor& loss);

}  // namespace sepkit::ad
