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
#include <span>
#include <vector>

#include "fpc/tensor.hpp"

// Stateless forward/backward kernels for the layer primitives. Backward
// kernels accumulate (+=) into the gradient spans they are given; an empty
// span means "not needed" and skips that part of the computation.
namespace fpc::kernels {

std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding);
std::size_t deconv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding);

// weight: (c_out, c_in, k, k); bias: empty or c_out values.
Tensor4D conv2d(const Tensor4D& x, const Tensor4D& weight, std::span<const Real> bias,
                std::size_t stride, std::size_t padding);
void conv2d_backward(const Tensor4D& x, const Tensor4D& weight, const Tensor4D& dout,
                     std::size_t stride, std::size_t padding, std::span<Real> dx,
                     std::span<Real> dweight, std::span<Real> dbias);

// Transposed convolution. weight: (c_in, c_out, k, k), i.e. the same tensor a
// conv2d mapping c_out -> c_in would use; deconv2d is its adjoint.
Tensor4D deconv2d(const Tensor4D& x, const Tensor4D& weight, std::span<const Real> bias,
                  std::size_t stride, std::size_t padding);
void deconv2d_backward(const Tensor4D& x, const Tensor4D& weight, const Tensor4D& dout,
                       std::size_t stride, std::size_t padding, std::span<Real> dx,
                       std::span<Real> dweight, std::span<Real> dbias);

struct BatchNormCache {
  std::vector<Real> inv_std;  // per channel
  Tensor4D xhat;
};

// Train mode: normalizes with batch statistics and folds them into the running
// estimates (running_var uses the unbiased batch variance).
Tensor4D batchnorm2d_train(const Tensor4D& x, std::span<const Real> gamma,
                           std::span<const Real> beta, Real eps, Real momentum,
                           std::span<Real> running_mean, std::span<Real> running_var,
                           BatchNormCache* cache);
Tensor4D batchnorm2d_eval(const Tensor4D& x, std::span<const Real> gamma,
                          std::span<const Real> beta, Real eps,
                          std::span<const Real> running_mean, std::span<const Real> running_var,
                          BatchNormCache* cache);
void batchnorm2d_backward_train(const BatchNormCache& cache, std::span<const Real> gamma,
                                const Tensor4D& dout, std::span<Real> dx, std::span<Real> dgamma,
                                std::span<Real> dbeta);
void batchnorm2d_backward_eval(const BatchNormCache& cache, std::span<const Real> gamma,
                               const Tensor4D& dout, std::span<Real> dx, std::span<Real> dgamma,
                               std::span<Real> dbeta);

Real silu(Real x);
Real silu_grad(Real x);

// Per-channel 3x3 cross-correlation with a fixed kernel, stride 1, zero padding 1.
Tensor4D depthwise3x3(const Tensor4D& x, const std::array<Real, 9>& kernel);
void depthwise3x3_backward(const Tensor4D& dout, const std::array<Real, 9>& kernel,
                           std::span<Real> dx);

}  // namespace fpc::kernels
