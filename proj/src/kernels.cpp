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

#include "fpc/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <utility>

#include "fpc/error.hpp"

namespace fpc::kernels {
namespace {

using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

struct Geometry {
  std::size_t k, stride, padding;
  std::size_t in_h, in_w;    // image side
  std::size_t out_h, out_w;  // column side
};

// Output columns [lo, hi) whose input index ox * stride + kj - pad is in range.
std::pair<std::size_t, std::size_t> valid_range(std::size_t kj, const Geometry& g, std::size_t in_w,
                                                std::size_t out_w) {
  std::size_t lo = 0;
  if (kj < g.padding) lo = (g.padding - kj + g.stride - 1) / g.stride;
  const std::size_t limit = in_w + g.padding - kj;  // ox * stride < limit
  std::size_t hi = limit == 0 ? 0 : (limit - 1) / g.stride + 1;
  hi = std::min(hi, out_w);
  return {std::min(lo, hi), hi};
}

// Unfolds the patches of one sample (c x in_h x in_w) into a
// (c*k*k) x (out_h*out_w) matrix.
void im2col(const Real* img, std::size_t c, const Geometry& g, Real* col) {
  const std::size_t plane_out = g.out_h * g.out_w;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const Real* src = img + ch * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        Real* dst = col + ((ch * g.k + ki) * g.k + kj) * plane_out;
        const auto [lo, hi] = valid_range(kj, g, g.in_w, g.out_w);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          Real* dst_row = dst + oy * g.out_w;
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill_n(dst_row, g.out_w, Real(0));
            continue;
          }
          const Real* src_row = src + iy * static_cast<std::ptrdiff_t>(g.in_w) + static_cast<std::ptrdiff_t>(kj) - pad;
          std::fill_n(dst_row, lo, Real(0));
          if (g.stride == 1) {
            std::copy(src_row + lo, src_row + hi, dst_row + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst_row[ox] = src_row[ox * g.stride];
          }
          std::fill(dst_row + hi, dst_row + g.out_w, Real(0));
        }
      }
    }
  }
}

// Adjoint of im2col for one sample: accumulates columns back onto the image.
void col2im(const Real* col, std::size_t c, const Geometry& g, Real* img) {
  const std::size_t plane_out = g.out_h * g.out_w;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t ch = 0; ch < c; ++ch) {
    Real* dst = img + ch * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const Real* src = col + ((ch * g.k + ki) * g.k + kj) * plane_out;
        const auto [lo, hi] = valid_range(kj, g, g.in_w, g.out_w);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          Real* dst_row = dst + iy * static_cast<std::ptrdiff_t>(g.in_w) + static_cast<std::ptrdiff_t>(kj) - pad;
          const Real* src_row = src + oy * g.out_w;
          if (g.stride == 1) {
            Real* __restrict d = dst_row;
            const Real* __restrict r = src_row;
            for (std::size_t ox = lo; ox < hi; ++ox) d[ox] += r[ox];
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst_row[ox * g.stride] += src_row[ox];
          }
        }
      }
    }
  }
}

// Scratch space reused across calls; kernels run single-threaded per graph.
Real* scratch(std::size_t n) {
  thread_local std::vector<Real> buf;
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

void add_bias(Tensor4D& out, std::span<const Real> bias) {
  if (bias.empty()) return;
  const Shape& s = out.shape();
  FPC_CHECK(bias.size() == s.c, ShapeError, "bias length does not match output channels");
  auto d = out.data();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      Real* p = d.data() + (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] += bias[c];
    }
}

void accumulate_bias_grad(const Tensor4D& dout, std::span<Real> dbias) {
  if (dbias.empty()) return;
  const Shape& s = dout.shape();
  auto d = dout.data();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const Real* p = d.data() + (n * s.c + c) * s.plane();
      Real acc = 0;
      for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
      dbias[c] += acc;
    }
}

void check_kernel(const Tensor4D& weight, std::size_t stride) {
  const Shape& ws = weight.shape();
  FPC_CHECK(ws.h == ws.w && ws.h > 0, ShapeError, "kernel must be square, got " + ws.str());
  FPC_CHECK(stride >= 1, ShapeError, "stride must be >= 1");
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding) {
  FPC_CHECK(stride >= 1, ShapeError, "stride must be >= 1");
  FPC_CHECK(in + 2 * padding >= k, ShapeError,
            "kernel " + std::to_string(k) + " exceeds padded input " +
                std::to_string(in + 2 * padding));
  return (in + 2 * padding - k) / stride + 1;
}

std::size_t deconv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding) {
  FPC_CHECK(stride >= 1 && in >= 1, ShapeError, "invalid transposed-conv geometry");
  const std::size_t full = (in - 1) * stride + k;
  FPC_CHECK(full > 2 * padding, ShapeError, "transposed-conv padding consumes the whole output");
  return full - 2 * padding;
}

Tensor4D conv2d(const Tensor4D& x, const Tensor4D& weight, std::span<const Real> bias,
                std::size_t stride, std::size_t padding) {
  check_kernel(weight, stride);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  FPC_CHECK(xs.c == ws.c, ShapeError,
            "conv2d input has " + std::to_string(xs.c) + " channels, kernel expects " +
                std::to_string(ws.c));
  const std::size_t k = ws.h;
  const Geometry g{k, stride, padding, xs.h, xs.w, conv_out_size(xs.h, k, stride, padding),
                   conv_out_size(xs.w, k, stride, padding)};
  const Shape os{xs.n, ws.n, g.out_h, g.out_w};
  const std::size_t K = ws.c * k * k;
  const std::size_t plane = g.out_h * g.out_w;

  Tensor4D out(os);
  Real* col = scratch(K * plane);
  const ConstMatMap wmat(weight.data().data(), ws.n, K);
  for (std::size_t s = 0; s < xs.n; ++s) {
    im2col(x.data().data() + s * xs.sample(), xs.c, g, col);
    MatMap(out.data().data() + s * os.sample(), ws.n, plane).noalias() = wmat * ConstMatMap(col, K, plane);
  }
  add_bias(out, bias);
  return out;
}

void conv2d_backward(const Tensor4D& x, const Tensor4D& weight, const Tensor4D& dout,
                     std::size_t stride, std::size_t padding, std::span<Real> dx,
                     std::span<Real> dweight, std::span<Real> dbias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const Shape& os = dout.shape();
  const std::size_t k = ws.h;
  const Geometry g{k, stride, padding, xs.h, xs.w, os.h, os.w};
  const std::size_t K = ws.c * k * k;
  const std::size_t plane = os.h * os.w;

  accumulate_bias_grad(dout, dbias);
  if (dx.empty() && dweight.empty()) return;

  Real* col = scratch(K * plane);
  const ConstMatMap wmat(weight.data().data(), ws.n, K);
  for (std::size_t s = 0; s < xs.n; ++s) {
    const ConstMatMap dmat(dout.data().data() + s * os.sample(), ws.n, plane);
    if (!dweight.empty()) {
      im2col(x.data().data() + s * xs.sample(), xs.c, g, col);
      MatMap(dweight.data(), ws.n, K).noalias() += dmat * ConstMatMap(col, K, plane).transpose();
    }
    if (!dx.empty()) {
      MatMap(col, K, plane).noalias() = wmat.transpose() * dmat;
      col2im(col, xs.c, g, dx.data() + s * xs.sample());
    }
  }
}

Tensor4D deconv2d(const Tensor4D& x, const Tensor4D& weight, std::span<const Real> bias,
                  std::size_t stride, std::size_t padding) {
  check_kernel(weight, stride);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  FPC_CHECK(xs.c == ws.n, ShapeError,
            "deconv2d input has " + std::to_string(xs.c) + " channels, kernel expects " +
                std::to_string(ws.n));
  const std::size_t k = ws.h;
  const Shape os{xs.n, ws.c, deconv_out_size(xs.h, k, stride, padding),
                 deconv_out_size(xs.w, k, stride, padding)};
  const Geometry g{k, stride, padding, os.h, os.w, xs.h, xs.w};
  const std::size_t K = ws.c * k * k;
  const std::size_t plane = xs.h * xs.w;

  Tensor4D out(os);
  Real* col = scratch(K * plane);
  const ConstMatMap wmat(weight.data().data(), ws.n, K);
  for (std::size_t s = 0; s < xs.n; ++s) {
    MatMap(col, K, plane).noalias() =
        wmat.transpose() * ConstMatMap(x.data().data() + s * xs.sample(), ws.n, plane);
    col2im(col, os.c, g, out.data().data() + s * os.sample());
  }
  add_bias(out, bias);
  return out;
}

void deconv2d_backward(const Tensor4D& x, const Tensor4D& weight, const Tensor4D& dout,
                       std::size_t stride, std::size_t padding, std::span<Real> dx,
                       std::span<Real> dweight, std::span<Real> dbias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const Shape& os = dout.shape();
  const std::size_t k = ws.h;
  const Geometry g{k, stride, padding, os.h, os.w, xs.h, xs.w};
  const std::size_t K = ws.c * k * k;
  const std::size_t plane = xs.h * xs.w;

  accumulate_bias_grad(dout, dbias);
  if (dx.empty() && dweight.empty()) return;

  Real* dcol = scratch(K * plane);
  const ConstMatMap wmat(weight.data().data(), ws.n, K);
  for (std::size_t s = 0; s < xs.n; ++s) {
    im2col(dout.data().data() + s * os.sample(), os.c, g, dcol);
    const ConstMatMap dmat(dcol, K, plane);
    if (!dweight.empty())
      MatMap(dweight.data(), ws.n, K).noalias() +=
          ConstMatMap(x.data().data() + s * xs.sample(), ws.n, plane) * dmat.transpose();
    if (!dx.empty())
      MatMap(dx.data() + s * xs.sample(), ws.n, plane).noalias() += wmat * dmat;
  }
}

namespace {

void check_bn(const Tensor4D& x, std::span<const Real> gamma, std::span<const Real> beta) {
  FPC_CHECK(gamma.size() == x.shape().c && beta.size() == x.shape().c, ShapeError,
            "batchnorm affine parameters do not match " + std::to_string(x.shape().c) +
                " channels");
}

}  // namespace

Tensor4D batchnorm2d_train(const Tensor4D& x, std::span<const Real> gamma,
                           std::span<const Real> beta, Real eps, Real momentum,
                           std::span<Real> running_mean, std::span<Real> running_var,
                           BatchNormCache* cache) {
  check_bn(x, gamma, beta);
  FPC_CHECK(eps > 0, ArgumentError, "batchnorm eps must be positive");
  const Shape& s = x.shape();
  const std::size_t m = s.n * s.plane();
  FPC_CHECK(m > 0, ShapeError, "batchnorm over an empty batch");
  Tensor4D out(s);
  Tensor4D xhat(s);
  std::vector<Real> inv_std(s.c);
  auto xd = x.data();
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const Real* p = xd.data() + (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
    }
    const double mean = sum / static_cast<double>(m);
    double sq = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const Real* p = xd.data() + (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(m);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[c] = static_cast<Real>(istd);
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const Real xh = static_cast<Real>((xd[base + i] - mean) * istd);
        xhat[base + i] = xh;
        out[base + i] = gamma[c] * xh + beta[c];
      }
    }
    if (!running_mean.empty()) {
      const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
      running_mean[c] = static_cast<Real>((1 - momentum) * running_mean[c] + momentum * mean);
      running_var[c] = static_cast<Real>((1 - momentum) * running_var[c] + momentum * unbiased);
    }
  }
  if (cache) {
    cache->inv_std = std::move(inv_std);
    cache->xhat = std::move(xhat);
  }
  return out;
}

Tensor4D batchnorm2d_eval(const Tensor4D& x, std::span<const Real> gamma,
                          std::span<const Real> beta, Real eps,
                          std::span<const Real> running_mean, std::span<const Real> running_var,
                          BatchNormCache* cache) {
  check_bn(x, gamma, beta);
  const Shape& s = x.shape();
  Tensor4D out(s);
  Tensor4D xhat(s);
  std::vector<Real> inv_std(s.c);
  for (std::size_t c = 0; c < s.c; ++c) {
    const Real istd = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
    inv_std[c] = istd;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const Real xh = (x[base + i] - running_mean[c]) * istd;
        xhat[base + i] = xh;
        out[base + i] = gamma[c] * xh + beta[c];
      }
    }
  }
  if (cache) {
    cache->inv_std = std::move(inv_std);
    cache->xhat = std::move(xhat);
  }
  return out;
}

void batchnorm2d_backward_train(const BatchNormCache& cache, std::span<const Real> gamma,
                                const Tensor4D& dout, std::span<Real> dx, std::span<Real> dgamma,
                                std::span<Real> dbeta) {
  const Shape& s = dout.shape();
  const double m = static_cast<double>(s.n * s.plane());
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        sum_dy += dout[base + i];
        sum_dy_xhat += static_cast<double>(dout[base + i]) * cache.xhat[base + i];
      }
    }
    if (!dgamma.empty()) dgamma[c] += static_cast<Real>(sum_dy_xhat);
    if (!dbeta.empty()) dbeta[c] += static_cast<Real>(sum_dy);
    if (dx.empty()) continue;
    const double scale = gamma[c] * cache.inv_std[c] / m;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i)
        dx[base + i] += static_cast<Real>(
            scale * (m * dout[base + i] - sum_dy - cache.xhat[base + i] * sum_dy_xhat));
    }
  }
}

void batchnorm2d_backward_eval(const BatchNormCache& cache, std::span<const Real> gamma,
                               const Tensor4D& dout, std::span<Real> dx, std::span<Real> dgamma,
                               std::span<Real> dbeta) {
  const Shape& s = dout.shape();
  for (std::size_t c = 0; c < s.c; ++c) {
    Real sum_dy = 0, sum_dy_xhat = 0;
    const Real scale = gamma[c] * cache.inv_std[c];
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        sum_dy += dout[base + i];
        sum_dy_xhat += dout[base + i] * cache.xhat[base + i];
        if (!dx.empty()) dx[base + i] += scale * dout[base + i];
      }
    }
    if (!dgamma.empty()) dgamma[c] += sum_dy_xhat;
    if (!dbeta.empty()) dbeta[c] += sum_dy;
  }
}

Real silu(Real x) { return x / (Real(1) + std::exp(-x)); }

Real silu_grad(Real x) {
  const Real s = Real(1) / (Real(1) + std::exp(-x));
  return s * (Real(1) + x * (Real(1) - s));
}

Tensor4D depthwise3x3(const Tensor4D& x, const std::array<Real, 9>& kernel) {
  const Shape& s = x.shape();
  Tensor4D out(s);
  const auto H = static_cast<std::ptrdiff_t>(s.h);
  const auto W = static_cast<std::ptrdiff_t>(s.w);
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const Real* src = x.data().data() + p * s.plane();
    Real* dst = out.data().data() + p * s.plane();
    for (std::ptrdiff_t i = 0; i < H; ++i)
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        Real acc = 0;
        for (std::ptrdiff_t a = 0; a < 3; ++a) {
          const std::ptrdiff_t y = i + a - 1;
          if (y < 0 || y >= H) continue;
          for (std::ptrdiff_t b = 0; b < 3; ++b) {
            const std::ptrdiff_t xx = j + b - 1;
            if (xx < 0 || xx >= W) continue;
            acc += kernel[static_cast<std::size_t>(a * 3 + b)] * src[y * W + xx];
          }
        }
        dst[i * W + j] = acc;
      }
  }
  return out;
}

void depthwise3x3_backward(const Tensor4D& dout, const std::array<Real, 9>& kernel,
                           std::span<Real> dx) {
  const Shape& s = dout.shape();
  const auto H = static_cast<std::ptrdiff_t>(s.h);
  const auto W = static_cast<std::ptrdiff_t>(s.w);
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const Real* g = dout.data().data() + p * s.plane();
    Real* d = dx.data() + p * s.plane();
    for (std::ptrdiff_t i = 0; i < H; ++i)
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        const Real gij = g[i * W + j];
        for (std::ptrdiff_t a = 0; a < 3; ++a) {
          const std::ptrdiff_t y = i + a - 1;
          if (y < 0 || y >= H) continue;
          for (std::ptrdiff_t b = 0; b < 3; ++b) {
            const std::ptrdiff_t xx = j + b - 1;
            if (xx < 0 || xx >= W) continue;
            d[y * W + xx] += kernel[static_cast<std::size_t>(a * 3 + b)] * gij;
          }
        }
      }
  }
}

}  // namespace fpc::kernels
