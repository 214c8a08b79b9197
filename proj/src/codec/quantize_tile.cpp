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

#include <algorithm>
#include <cmath>

#include "fpc/codec.hpp"

namespace fpc::codec {

void ClipRange::validate() const {
  FPC_CHECK(std::isfinite(lo) && std::isfinite(hi) && lo < hi, ArgumentError,
            "clip range needs lo < hi");
}

TileGrid TileGrid::for_channels(std::size_t channels) {
  FPC_CHECK(channels >= 1, ArgumentError, "cannot tile zero channels");
  std::size_t rows = 1;
  for (std::size_t r = 1; r * r <= channels; ++r)
    if (channels % r == 0) rows = r;
  return {rows, channels / rows};
}

std::uint8_t quantize_value(double x, const ClipRange& r) {
  const double q = std::round((x - r.lo) * 255.0 / (r.hi - r.lo));
  if (!(q > 0)) return 0;  // also maps NaN to 0
  return static_cast<std::uint8_t>(std::min(q, 255.0));
}

double dequantize_value(std::uint8_t q, const ClipRange& r) {
  return r.lo + static_cast<double>(q) * (r.hi - r.lo) / 255.0;
}

Planes clip_quantize(const Tensor4D& t, const ClipRange& r) {
  r.validate();
  Planes p{t.shape(), std::vector<std::uint8_t>(t.numel())};
  for (std::size_t i = 0; i < t.numel(); ++i) p.data[i] = quantize_value(t[i], r);
  return p;
}

Tensor4D dequantize(const Planes& q, const ClipRange& r) {
  r.validate();
  FPC_CHECK(q.data.size() == q.shape.numel(), ShapeError, "plane data does not match its shape");
  Tensor4D t(q.shape);
  for (std::size_t i = 0; i < q.data.size(); ++i) t[i] = static_cast<Real>(dequantize_value(q.data[i], r));
  return t;
}

GrayImage tile(const Planes& planes, const TileGrid& g) {
  const Shape& s = planes.shape;
  FPC_CHECK(g.rows >= 1 && g.cols >= 1 && g.cells() == s.c, ArgumentError,
            "tile grid " + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                " does not cover " + std::to_string(s.c) + " channels");
  GrayImage img{s.n * g.rows * s.h, g.cols * s.w, {}};
  img.pixels.resize(img.height * img.width);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t y0 = (n * g.rows + c / g.cols) * s.h;
      const std::size_t x0 = (c % g.cols) * s.w;
      const std::uint8_t* src = planes.data.data() + (n * s.c + c) * s.plane();
      for (std::size_t y = 0; y < s.h; ++y)
        std::copy_n(src + y * s.w, s.w, img.pixels.data() + (y0 + y) * img.width + x0);
    }
  return img;
}

Planes untile(const GrayImage& img, const TileGrid& g, std::size_t c, std::size_t h, std::size_t w) {
  FPC_CHECK(g.rows >= 1 && g.cols >= 1 && g.cells() == c, ArgumentError,
            "tile grid does not cover " + std::to_string(c) + " channels");
  FPC_CHECK(h > 0 && w > 0 && img.width == g.cols * w && img.height % (g.rows * h) == 0,
            ShapeError,
            "mosaic " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                " does not match grid and plane size");
  FPC_CHECK(img.pixels.size() == img.height * img.width, ShapeError, "mosaic pixel count mismatch");
  const std::size_t n = img.height / (g.rows * h);
  Planes p{Shape{n, c, h, w}, std::vector<std::uint8_t>(n * c * h * w)};
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t y0 = (s * g.rows + ch / g.cols) * h;
      const std::size_t x0 = (ch % g.cols) * w;
      std::uint8_t* dst = p.data.data() + (s * c + ch) * h * w;
      for (std::size_t y = 0; y < h; ++y)
        std::copy_n(img.pixels.data() + (y0 + y) * img.width + x0, w, dst + y * w);
    }
  return p;
}

}  // namespace fpc::codec
