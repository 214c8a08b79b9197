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

#include "fpc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "fpc/error.hpp"
#include "fpc/kernels.hpp"

namespace fpc::loss {

void LossConfig::validate() const {
  FPC_CHECK(beta >= 0, ConfigError, "beta must be non-negative");
  FPC_CHECK(w >= 0, ConfigError, "w must be non-negative");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      FPC_CHECK(sobel_x[static_cast<std::size_t>(i * 3 + j)] ==
                    sobel_y[static_cast<std::size_t>(j * 3 + i)],
                ConfigError, "sobel_x must be the transpose of sobel_y");
}

std::string LossReport::to_json() const {
  nlohmann::json j{{"l_rec", l_rec},   {"l_obj", l_obj},
                   {"l_tot", l_tot},   {"term_l1", term_l1},
                   {"term_sobel_x", term_sobel_x}, {"term_sobel_y", term_sobel_y}};
  return j.dump();
}

namespace {

Tensor4D replicate_sobel(const Tensor4D& img, const std::array<Real, 9>& k) {
  const Shape& s = img.shape();
  Tensor4D out(s);
  const auto H = static_cast<std::ptrdiff_t>(s.h);
  const auto W = static_cast<std::ptrdiff_t>(s.w);
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const Real* src = img.data().data() + p * s.plane();
    Real* dst = out.data().data() + p * s.plane();
    for (std::ptrdiff_t i = 0; i < H; ++i)
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        double acc = 0;
        for (std::ptrdiff_t a = 0; a < 3; ++a) {
          const std::ptrdiff_t y = std::clamp<std::ptrdiff_t>(i + a - 1, 0, H - 1);
          for (std::ptrdiff_t b = 0; b < 3; ++b) {
            const std::ptrdiff_t x = std::clamp<std::ptrdiff_t>(j + b - 1, 0, W - 1);
            acc += static_cast<double>(k[static_cast<std::size_t>(a * 3 + b)]) * src[y * W + x];
          }
        }
        dst[i * W + j] = static_cast<Real>(acc);
      }
  }
  return out;
}

void check_same(const Tensor4D& a, const Tensor4D& b) {
  FPC_CHECK(a.shape() == b.shape(), ShapeError,
            "shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
}

}  // namespace

std::pair<Tensor4D, Tensor4D> sobel_grad(const Tensor4D& img, const LossConfig& cfg,
                                         BorderMode border) {
  FPC_CHECK(img.shape().h >= 3 && img.shape().w >= 3, ShapeError,
            "sobel needs at least 3x3 spatial extent, got " + img.shape().str());
  if (border == BorderMode::Replicate)
    return {replicate_sobel(img, cfg.sobel_x), replicate_sobel(img, cfg.sobel_y)};
  return {kernels::depthwise3x3(img, cfg.sobel_x), kernels::depthwise3x3(img, cfg.sobel_y)};
}

RecLoss rec_loss(const ad::Var& x, const ad::Var& xhat, const LossConfig& cfg) {
  FPC_CHECK(x.shape() == xhat.shape(), ShapeError,
            "rec_loss shape mismatch: " + x.shape().str() + " vs " + xhat.shape().str());
  FPC_CHECK(x.shape().h >= 3 && x.shape().w >= 3, ShapeError, "rec_loss needs >= 3x3 images");
  // The filters are linear, so S*x - S*xhat is computed as S*(x - xhat).
  const ad::Var diff = ad::sub(x, xhat);
  RecLoss out;
  out.total = ad::mean_abs(diff);
  out.term_l1 = out.total.value()[0];
  const ad::Var tx = ad::mean_abs(ad::depthwise3x3(diff, cfg.sobel_x));
  const ad::Var ty = ad::mean_abs(ad::depthwise3x3(diff, cfg.sobel_y));
  out.term_sobel_x = tx.value()[0];
  out.term_sobel_y = ty.value()[0];
  if (cfg.beta != 0) {
    const Real beta = static_cast<Real>(cfg.beta);
    out.total = ad::add_scaled(ad::add_scaled(out.total, tx, beta), ty, beta);
  }
  return out;
}

LossReport rec_loss(const Tensor4D& x, const Tensor4D& xhat, const LossConfig& cfg) {
  ad::Tape tape;
  const RecLoss r = rec_loss(tape.constant(x), tape.constant(xhat), cfg);
  LossReport rep;
  rep.term_l1 = r.term_l1;
  rep.term_sobel_x = r.term_sobel_x;
  rep.term_sobel_y = r.term_sobel_y;
  rep.l_rec = rep.term_l1 + cfg.beta * rep.term_sobel_x + cfg.beta * rep.term_sobel_y;
  return rep;
}

ad::Var task_loss(const ad::Var& logits, std::span<const std::int32_t> labels) {
  return ad::cross_entropy(logits, labels);
}

double task_loss(const Tensor4D& logits, std::span<const std::int32_t> labels) {
  ad::Tape tape;
  return ad::cross_entropy(tape.constant(logits), labels).value()[0];
}

double total_loss(double l_obj, double l_rec, const LossConfig& cfg) { return l_obj - cfg.w * l_rec; }

ad::Var total_loss(const ad::Var& l_obj, const ad::Var& l_rec, const LossConfig& cfg) {
  return ad::add_scaled(l_obj, l_rec, static_cast<Real>(-cfg.w));
}

double psnr(const Tensor4D& x, const Tensor4D& xhat, double peak) {
  check_same(x, xhat);
  FPC_CHECK(peak > 0, ArgumentError, "psnr peak must be positive");
  FPC_CHECK(x.numel() > 0, ShapeError, "psnr of empty tensors");
  double se = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(xhat[i]);
    se += d * d;
  }
  if (se == 0) return kInfinitePsnr;
  const double mse = se / static_cast<double>(x.numel());
  return 10.0 * std::log10(peak * peak / mse);
}

Tensor4D gradient_magnitude(const Tensor4D& img) {
  const auto [gx, gy] = sobel_grad(img, LossConfig{}, BorderMode::Replicate);
  Tensor4D g(img.shape());
  for (std::size_t i = 0; i < g.numel(); ++i)
    g[i] = static_cast<Real>(std::sqrt(static_cast<double>(gx[i]) * gx[i] +
                                       static_cast<double>(gy[i]) * gy[i]));
  return g;
}

double edge_psnr(const Tensor4D& x, const Tensor4D& xhat) {
  check_same(x, xhat);
  return psnr(gradient_magnitude(x), gradient_magnitude(xhat), 255.0);
}

double accuracy(const Tensor4D& logits, std::span<const std::int32_t> labels) {
  const Shape& s = logits.shape();
  FPC_CHECK(labels.size() == s.n, ShapeError, "label count does not match logits");
  if (s.n == 0) return 0.0;
  const std::size_t k = s.sample();
  std::size_t correct = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto row = logits.data().subspan(n * k, k);
    const auto best = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[n]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(s.n);
}

}  // namespace fpc::loss
