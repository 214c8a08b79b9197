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
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>

#include "fpc/autodiff.hpp"
#include "fpc/tensor.hpp"

namespace fpc::loss {

inline constexpr std::array<Real, 9> kSobelX{-1, 0, 1, -2, 0, 2, -1, 0, 1};
inline constexpr std::array<Real, 9> kSobelY{-1, -2, -1, 0, 0, 0, 1, 2, 1};

struct LossConfig {
  double beta = 5.0;  // weight of each Sobel term in the reconstruction loss
  double w = 0.1;     // weight of the reconstruction loss in the total loss
  std::array<Real, 9> sobel_x = kSobelX;
  std::array<Real, 9> sobel_y = kSobelY;

  void validate() const;
};

struct LossReport {
  double l_rec = 0;
  double l_obj = 0;
  double l_tot = 0;
  double term_l1 = 0;
  double term_sobel_x = 0;
  double term_sobel_y = 0;

  std::string to_json() const;
};

enum class BorderMode { Zero, Replicate };

// Per-channel Sobel responses, same dims as the input. The losses use zero
// borders; the edge metric uses replicated borders so constant images have
// a zero gradient everywhere.
std::pair<Tensor4D, Tensor4D> sobel_grad(const Tensor4D& img, const LossConfig& cfg = {},
                                         BorderMode border = BorderMode::Zero);

// Differentiable reconstruction loss. term_x / term_y are only recorded on the
// tape when beta != 0, so a beta == 0 loss is exactly the plain l1 term.
struct RecLoss {
  ad::Var total;
  double term_l1 = 0;
  double term_sobel_x = 0;
  double term_sobel_y = 0;
};
RecLoss rec_loss(const ad::Var& x, const ad::Var& xhat, const LossConfig& cfg);
LossReport rec_loss(const Tensor4D& x, const Tensor4D& xhat, const LossConfig& cfg);

ad::Var task_loss(const ad::Var& logits, std::span<const std::int32_t> labels);
double task_loss(const Tensor4D& logits, std::span<const std::int32_t> labels);

double total_loss(double l_obj, double l_rec, const LossConfig& cfg);
ad::Var total_loss(const ad::Var& l_obj, const ad::Var& l_rec, const LossConfig& cfg);

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// 10 log10(peak^2 / MSE); kInfinitePsnr when the inputs are identical.
double psnr(const Tensor4D& x, const Tensor4D& xhat, double peak);
// PSNR between the Sobel gradient-magnitude maps of two [0, 255] images,
// peak 255.
double edge_psnr(const Tensor4D& x, const Tensor4D& xhat);
Tensor4D gradient_magnitude(const Tensor4D& img);

// Fraction of rows whose arg-max logit equals the label.
double accuracy(const Tensor4D& logits, std::span<const std::int32_t> labels);

}  // namespace fpc::loss
