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

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fpc {

// Training runs in 32-bit floats. The gradient-check build compiles the same
// sources with FPC_REAL_DOUBLE to take finite-difference noise out of the
// picture.
#ifdef FPC_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  std::size_t sample() const { return c * h * w; }
  std::array<std::size_t, 4> as_array() const { return {n, c, h, w}; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

// N x C x H x W array stored row-major (N outermost). The gradient buffer is
// optional and, when present, always has the same shape as the data.
class Tensor4D {
 public:
  Tensor4D() = default;
  explicit Tensor4D(Shape shape, Real fill = Real(0));
  Tensor4D(Shape shape, std::vector<Real> data);

  static Tensor4D zeros_like(const Tensor4D& other) { return Tensor4D(other.shape()); }

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[offset(n, c, h, w)];
  }
  Real at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }
  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  bool has_grad() const { return grad_.has_value(); }
  // Allocates a zeroed gradient buffer if none exists yet.
  std::span<Real> grad();
  std::span<const Real> grad() const;
  void zero_grad();
  void drop_grad() { grad_.reset(); }

  // Copies samples [first, first + count) into a new tensor.
  Tensor4D slice_batch(std::size_t first, std::size_t count) const;
  Tensor4D reshaped(Shape shape) const;

  void fill(Real v);

 private:
  Shape shape_{};
  std::vector<Real> data_;
  std::optional<std::vector<Real>> grad_;
};

// Gathers the listed samples of `src` into a new batch, in order.
Tensor4D gather_batch(const Tensor4D& src, std::span<const std::size_t> indices);

}  // namespace fpc
