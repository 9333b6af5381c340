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

#include "c2l/tensor.h"

#include <sstream>

#include "c2l/errors.h"

namespace c2l {

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  const int64_t n = NumElements(shape);
  return FromData(std::move(shape), std::vector<double>(n, 0.0),
                  requires_grad);
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data,
                        bool requires_grad) {
  for (int64_t d : shape) {
    if (d <= 0) {
      throw ShapeError("tensor dimensions must be positive, got " +
                       ShapeToString(shape));
    }
  }
  if (NumElements(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("shape " + ShapeToString(shape) + " does not hold " +
                     std::to_string(data.size()) + " elements");
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromData({}, {value}, requires_grad);
}

int64_t Tensor::rows() const {
  if (rank() == 2) return dim(0);
  if (rank() == 1) return 1;
  throw ShapeError("rows() needs a rank-1 or rank-2 tensor, got " +
                   ShapeToString(shape()));
}

int64_t Tensor::cols() const {
  if (rank() == 2) return dim(1);
  if (rank() == 1) return dim(0);
  throw ShapeError("cols() needs a rank-1 or rank-2 tensor, got " +
                   ShapeToString(shape()));
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + ShapeToString(shape()));
  }
  return impl_->data[0];
}

std::span<const double> Tensor::grad() const {
  if (!impl_->grad) throw ContractError("tensor has no gradient");
  return *impl_->grad;
}

std::span<double> Tensor::mutable_grad() const {
  if (!impl_->grad) impl_->grad.emplace(impl_->data.size(), 0.0);
  return *impl_->grad;
}

Tensor Tensor::Clone() const {
  return FromData(impl_->shape, impl_->data, impl_->requires_grad);
}

void Tape::Record(Tensor output, BackwardFn backward) {
  nodes_.push_back({std::move(output), std::move(backward)});
}

void Backward(const Tensor& loss, Tape& tape) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward needs a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw ContractError("loss is not connected to any differentiable input");
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
    if (it->output.has_grad()) it->backward();
  }
}

}  // namespace c2l
