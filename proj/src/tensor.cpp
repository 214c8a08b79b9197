// Copyright 2026 The fpc Authors.
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

#include "fpc/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "fpc/error.hpp"

namespace fpc {

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

Tensor4D::Tensor4D(Shape shape, Real fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor4D::Tensor4D(Shape shape, std::vector<Real> data) : shape_(shape), data_(std::move(data)) {
  FPC_CHECK(data_.size() == shape_.numel(), ShapeError,
            "tensor data length " + std::to_string(data_.size()) + " does not match " + shape_.str());
}

std::span<Real> Tensor4D::grad() {
  if (!grad_) grad_.emplace(data_.size(), Real(0));
  return *grad_;
}

std::span<const Real> Tensor4D::grad() const {
  FPC_CHECK(grad_.has_value(), StateError, "tensor has no gradient buffer");
  return *grad_;
}

void Tensor4D::zero_grad() {
  if (grad_)
    std::fill(grad_->begin(), grad_->end(), Real(0));
  else
    grad_.emplace(data_.size(), Real(0));
}

Tensor4D Tensor4D::slice_batch(std::size_t first, std::size_t count) const {
  FPC_CHECK(first + count <= shape_.n, ShapeError, "batch slice out of range for " + shape_.str());
  Shape s = shape_;
  s.n = count;
  const std::size_t stride = shape_.sample();
  std::vector<Real> out(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                        data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return Tensor4D(s, std::move(out));
}

Tensor4D Tensor4D::reshaped(Shape shape) const {
  FPC_CHECK(shape.numel() == numel(), ShapeError,
            "cannot reshape " + shape_.str() + " to " + shape.str());
  return Tensor4D(shape, data_);
}

void Tensor4D::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

Tensor4D gather_batch(const Tensor4D& src, std::span<const std::size_t> indices) {
  Shape s = src.shape();
  const std::size_t stride = s.sample();
  s.n = indices.size();
  Tensor4D out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    FPC_CHECK(indices[i] < src.shape().n, ShapeError, "gather index out of range");
    std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(indices[i] * stride), stride,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return out;
}

}  // namespace fpc
