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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fpc/error.hpp"
#include "fpc/losses.hpp"
#include "test_util.hpp"

namespace fpc::loss {
namespace {

using test_util::random_tensor;

Tensor4D ramp(std::size_t h, std::size_t w, bool horizontal, double slope = 1.0) {
  Tensor4D t({1, 1, h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) t.at(0, 0, i, j) = static_cast<Real>(slope * (horizontal ? j : i));
  return t;
}

// rec_loss by brute force over every pixel of both filtered maps.
double rec_loss_oracle(const Tensor4D& x, const Tensor4D& y, double beta) {
  const Shape s = x.shape();
  const double n = static_cast<double>(x.numel());
  double l1 = 0, ex = 0, ey = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) l1 += std::abs(static_cast<double>(x[i]) - y[i]);
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) {
          double gx = 0, gy = 0;
          for (int u = -1; u <= 1; ++u)
            for (int v = -1; v <= 1; ++v) {
              const long r = static_cast<long>(i) + u, q = static_cast<long>(j) + v;
              if (r < 0 || q < 0 || r >= static_cast<long>(s.h) || q >= static_cast<long>(s.w)) continue;
              const double d = static_cast<double>(x.at(b, c, r, q)) - y.at(b, c, r, q);
              gx += d * kSobelX[(u + 1) * 3 + (v + 1)];
              gy += d * kSobelY[(u + 1) * 3 + (v + 1)];
            }
          ex += std::abs(gx);
          ey += std::abs(gy);
        }
  return l1 / n + beta * ex / n + beta * ey / n;
}

TEST(Sobel, ConstantImageHasNoGradient) {
  const auto [gx, gy] = sobel_grad(Tensor4D({1, 2, 4, 5}, 3.0f), {}, BorderMode::Replicate);
  for (Real v : gx.data()) EXPECT_EQ(v, 0);
  for (Real v : gy.data()) EXPECT_EQ(v, 0);
}

TEST(Sobel, RampsGiveEightInInterior) {
  const auto [hx, hy] = sobel_grad(ramp(5, 6, true));
  const auto [vx, vy] = sobel_grad(ramp(5, 6, false));
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t j = 1; j < 5; ++j) {
      EXPECT_EQ(hx.at(0, 0, i, j), 8);
      EXPECT_EQ(hy.at(0, 0, i, j), 0);
      EXPECT_EQ(vy.at(0, 0, i, j), 8);
      EXPECT_EQ(vx.at(0, 0, i, j), 0);
    }
  EXPECT_EQ(hx.shape(), (Shape{1, 1, 5, 6}));
}

TEST(Sobel, KernelsAreTransposes) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(kSobelX[i * 3 + j], kSobelY[j * 3 + i]);
}

TEST(Sobel, TooSmallInputIsShapeError) {
  EXPECT_THROW(sobel_grad(Tensor4D({1, 1, 2, 5})), ShapeError);
}

TEST(RecLoss, IdenticalInputsGiveZero) {
  const Tensor4D x = random_tensor({2, 3, 5, 5}, 1);
  EXPECT_EQ(rec_loss(x, x, {}).l_rec, 0);
}

TEST(RecLoss, OnesVersusZerosIncludingBorders) {
  const LossReport r = rec_loss(Tensor4D({1, 1, 4, 4}, 1.0f), Tensor4D({1, 1, 4, 4}), {});
  EXPECT_DOUBLE_EQ(r.term_l1, 1.0);
  EXPECT_DOUBLE_EQ(r.term_sobel_x, 1.75);
  EXPECT_DOUBLE_EQ(r.term_sobel_y, 1.75);
  EXPECT_DOUBLE_EQ(r.l_rec, 18.5);
}

TEST(RecLoss, MatchesBruteForceOnRandomImages) {
  const Tensor4D x = random_tensor({2, 3, 6, 7}, 5), y = random_tensor({2, 3, 6, 7}, 6);
  EXPECT_NEAR(rec_loss(x, y, {}).l_rec, rec_loss_oracle(x, y, 5.0), 1e-5);
}

TEST(RecLoss, DoublingBetaDoublesSobelPart) {
  const Tensor4D x = random_tensor({1, 3, 5, 5}, 7), y = random_tensor({1, 3, 5, 5}, 8);
  LossConfig a, b;
  a.beta = 2.5;
  b.beta = 5.0;
  const LossReport ra = rec_loss(x, y, a), rb = rec_loss(x, y, b);
  EXPECT_NEAR(rb.l_rec - rb.term_l1, 2 * (ra.l_rec - ra.term_l1), 1e-12);
  EXPECT_DOUBLE_EQ(rb.l_rec, rb.term_l1 + 5.0 * rb.term_sobel_x + 5.0 * rb.term_sobel_y);
}

TEST(RecLoss, Symmetric) {
  const Tensor4D x = random_tensor({2, 1, 4, 4}, 9), y = random_tensor({2, 1, 4, 4}, 10);
  EXPECT_DOUBLE_EQ(rec_loss(x, y, {}).l_rec, rec_loss(y, x, {}).l_rec);
}

TEST(RecLoss, TapeValueMatchesTensorValue) {
  const Tensor4D x = random_tensor({2, 3, 5, 5}, 11), y = random_tensor({2, 3, 5, 5}, 12);
  ad::Tape tape;
  const RecLoss r = rec_loss(tape.constant(x), tape.constant(y), LossConfig{});
  EXPECT_NEAR(r.total.value()[0], rec_loss(x, y, {}).l_rec, 1e-5);
}

TEST(RecLoss, ShapeMismatch) {
  EXPECT_THROW(rec_loss(Tensor4D({1, 1, 4, 4}), Tensor4D({1, 1, 4, 5}), {}), ShapeError);
}

TEST(TaskLoss, UniformLogitsGiveLogK) {
  const std::vector<std::int32_t> labels{0, 1, 2, 3};
  EXPECT_NEAR(task_loss(Tensor4D({4, 4, 1, 1}), labels), std::log(4.0), 1e-6);
}

TEST(TaskLoss, HandComputedTwoByThree) {
  const Tensor4D logits({2, 3, 1, 1}, {1, 2, 3, 0.5f, -1, 2});
  const std::vector<std::int32_t> labels{2, 0};
  EXPECT_NEAR(task_loss(logits, labels), 1.0744586305507686, 1e-6);
}

TEST(TaskLoss, VanishesWithMargin) {
  const std::vector<std::int32_t> labels{1};
  double prev = 1e9;
  for (float m : {1.0f, 5.0f, 20.0f}) {
    const double l = task_loss(Tensor4D({1, 3, 1, 1}, {0, m, 0}), labels);
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_LT(prev, 1e-8);
  const std::vector<std::int32_t> bad{3};
  EXPECT_THROW(task_loss(Tensor4D({1, 3, 1, 1}), bad), ArgumentError);
}

TEST(TotalLoss, Arithmetic) {
  LossConfig cfg;
  EXPECT_DOUBLE_EQ(total_loss(1.0, 2.0, cfg), 0.8);
  cfg.w = 0;
  EXPECT_DOUBLE_EQ(total_loss(1.3, 7.0, cfg), 1.3);
  cfg.w = 0.1;
  EXPECT_LT(total_loss(1.0, 2.5, cfg), total_loss(1.0, 2.0, cfg));
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.beta = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.beta = 0;  // the attack loss runs with the Sobel terms switched off
  EXPECT_NO_THROW(cfg.validate());
  cfg = {};
  cfg.w = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.sobel_x[1] = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Psnr, ClosedForms) {
  const Tensor4D x({1, 1, 4, 4}, 100.0f);
  EXPECT_EQ(psnr(x, x, 255), kInfinitePsnr);
  const Tensor4D off1({1, 1, 4, 4}, 101.0f), off2({1, 1, 4, 4}, 102.0f);
  EXPECT_NEAR(psnr(x, off1, 255), 20 * std::log10(255.0), 1e-9);
  EXPECT_NEAR(psnr(x, off1, 255), 48.13, 5e-3);
  EXPECT_NEAR(psnr(x, off1, 255) - psnr(x, off2, 255), 20 * std::log10(2.0), 1e-9);
  EXPECT_THROW(psnr(x, Tensor4D({1, 1, 4, 3}), 255), ShapeError);
}

TEST(EdgePsnr, ConstantVersusRamp) {
  const Tensor4D flat({1, 1, 5, 5}, 9.0f);
  EXPECT_EQ(edge_psnr(flat, flat), kInfinitePsnr);
  // Replicated borders give 4 on the outer columns and 8 inside.
  EXPECT_NEAR(edge_psnr(flat, ramp(5, 5, true)), 31.618023468697665, 1e-9);
}

TEST(EdgePsnr, InvariantToIntensityOffset) {
  const Tensor4D x = random_tensor({1, 3, 6, 6}, 13, 0, 200), y = random_tensor({1, 3, 6, 6}, 14, 0, 200);
  Tensor4D xs = x, ys = y;
  for (Real& v : xs.data()) v += 25;
  for (Real& v : ys.data()) v += 25;
  EXPECT_NEAR(edge_psnr(x, y), edge_psnr(xs, ys), 1e-4);
}

TEST(Accuracy, ArgMaxCounts) {
  const Tensor4D logits({3, 2, 1, 1}, {0, 1, 2, 1, 0, 3});
  const std::vector<std::int32_t> labels{1, 0, 0};
  EXPECT_NEAR(accuracy(logits, labels), 2.0 / 3.0, 1e-12);
}

}  // namespace
}  // namespace fpc::loss
