// Copyright 2026 The c2l Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef C2L_TENSOR_H_
#define C2L_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace c2l {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major array of doubles. Tensor is a shared handle: copies refer
// to the same storage, which is what lets the tape hold on to intermediate
// values and route gradients back to parameters.
class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<double> data,
                         bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  bool SameAs(const Tensor& other) const { return impl_ == other.impl_; }

  const Shape& shape() const { return impl_->shape; }
  int64_t rank() const { return static_cast<int64_t>(impl_->shape.size()); }
  int64_t dim(int64_t i) const { return impl_->shape.at(i); }
  int64_t size() const { return static_cast<int64_t>(impl_->data.size()); }
  // Rows/cols of a rank-2 tensor; a rank-1 tensor is treated as one row.
  int64_t rows() const;
  int64_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double at(int64_t r, int64_t c) const { return impl_->data[r * cols() + c]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  bool has_grad() const { return impl_->grad.has_value(); }
  std::span<const double> grad() const;
  // Allocates a zero gradient on first use. Gradient state belongs to the
  // shared storage, so it is reachable through const handles.
  std::span<double> mutable_grad() const;
  void clear_grad() const { impl_->grad.reset(); }

  // Deep copy without gradient state.
  Tensor Clone() const;

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::optional<std::vector<double>> grad;
  };
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Impl> impl_;
};

// Ordered record of differentiable operations executed during a forward
// pass. Nodes are appended in execution order, so the record is already
// topologically sorted; Backward walks it in reverse exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void Record(Tensor output, BackwardFn backward);
  size_t size() const { return nodes_.size(); }
  void Clear() { nodes_.clear(); }

 private:
  friend void Backward(const Tensor& loss, Tape& tape);

  struct Node {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Seeds d(loss)/d(loss) = 1 and propagates through the tape. Tensors not
// reachable from the loss keep an absent gradient.
void Backward(const Tensor& loss, Tape& tape);

}  // namespace c2l

#endif  // C2L_TENSOR_H_
