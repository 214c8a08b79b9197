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

#include "fpc/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fpc/byte_io.hpp"
#include "fpc/error.hpp"
#include "fpc/rng.hpp"

namespace fpc::data {
namespace {

constexpr std::size_t kSuper = 4;  // supersampling factor per axis
constexpr std::uint64_t kLabelStream = 0x6c6162656cULL;
constexpr std::uint64_t kImageStream = 0x696d616765ULL;

struct Geometry {
  double cx, cy, r, theta;
};

bool inside(ShapeClass cls, const Geometry& g, double x, double y) {
  const double dx = x - g.cx, dy = y - g.cy;
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  const double u = (c * dx + s * dy) / g.r;
  const double v = (-s * dx + c * dy) / g.r;
  switch (cls) {
    case ShapeClass::Circle: return u * u + v * v <= 1.0;
    case ShapeClass::Square: return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
    case ShapeClass::Triangle: {
      // Equilateral, circumradius 1, apex at v = -1.
      const double h = 0.5;
      if (v > h) return false;
      const double half = (v + 1.0) / 1.5 * std::sqrt(3.0) / 2.0;
      return std::abs(u) <= half;
    }
    case ShapeClass::Cross:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 0.95) || (std::abs(v) <= 0.3 && std::abs(u) <= 0.95);
    case ShapeClass::Diamond: return std::abs(u) + std::abs(v) <= 1.0;
    case ShapeClass::Ring: {
      const double d = u * u + v * v;
      return d <= 1.0 && d >= 0.35;
    }
  }
  return false;
}

using Color = std::array<double, 3>;

Color random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

// 3x5 glyph bitmaps from 15 random bits, at least 5 set.
std::array<bool, 15> random_glyph(Rng& rng) {
  std::array<bool, 15> g{};
  std::size_t set = 0;
  while (set < 5) {
    set = 0;
    for (bool& b : g) {
      b = rng.below(2) == 1;
      set += b;
    }
  }
  return g;
}

}  // namespace

std::string to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::Circle: return "circle";
    case ShapeClass::Square: return "square";
    case ShapeClass::Triangle: return "triangle";
    case ShapeClass::Cross: return "cross";
    case ShapeClass::Diamond: return "diamond";
    case ShapeClass::Ring: return "ring";
  }
  return "unknown";
}

void SceneSpec::validate() const {
  FPC_CHECK(num_classes >= 2 && num_classes <= kMaxClasses, ConfigError,
            "num_classes must be in [2, " + std::to_string(kMaxClasses) + "]");
  FPC_CHECK(height >= 16 && width >= 16, ConfigError, "scene images must be at least 16x16");
  FPC_CHECK(channels == 1 || channels == 3, ConfigError, "scenes have 1 or 3 channels");
  FPC_CHECK(glyph_density >= 0 && std::isfinite(glyph_density), ConfigError,
            "glyph_density must be non-negative");
}

Dataset Dataset::subset(std::size_t first, std::size_t count) const {
  FPC_CHECK(first + count <= size(), ArgumentError, "subset outside the dataset");
  Dataset d;
  d.images = images.slice_batch(first, count);
  d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                  labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  return d;
}

std::int32_t label_for(const SceneSpec& spec, std::uint64_t index) {
  const std::uint64_t k = spec.num_classes;
  const auto order = shuffled_indices(k, Rng::derive(spec.seed, kLabelStream, index / k));
  return static_cast<std::int32_t>(order[index % k]);
}

Tensor4D render_image(const SceneSpec& spec, std::uint64_t index, std::int32_t label) {
  spec.validate();
  FPC_CHECK(label >= 0 && static_cast<std::size_t>(label) < spec.num_classes, ArgumentError,
            "label out of range");
  Rng rng(Rng::derive(spec.seed, kImageStream, index));
  const std::size_t H = spec.height, W = spec.width, C = spec.channels;
  const double size = static_cast<double>(std::min(H, W));

  // Background: linear blend between two colors along a random direction.
  const bool dark_bg = rng.below(2) == 0;
  const Color bg0 = dark_bg ? random_color(rng, 10, 90) : random_color(rng, 165, 245);
  const Color bg1 = dark_bg ? random_color(rng, 10, 90) : random_color(rng, 165, 245);
  const double dir = rng.uniform(0, 2 * std::numbers::pi);
  const Color fg = dark_bg ? random_color(rng, 150, 250) : random_color(rng, 5, 105);

  Geometry g{};
  g.r = rng.uniform(0.2, 0.32) * size;
  g.cx = rng.uniform(g.r + 2, static_cast<double>(W) - g.r - 2);
  g.cy = rng.uniform(g.r + 2, static_cast<double>(H) - g.r - 2);
  g.theta = rng.uniform(-0.4, 0.4);
  const auto cls = static_cast<ShapeClass>(label);

  std::vector<double> img(C * H * W);
  const double ux = std::cos(dir) / static_cast<double>(W), uy = std::sin(dir) / static_cast<double>(H);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double t = std::clamp(0.5 + ux * (x - W / 2.0) + uy * (y - H / 2.0), 0.0, 1.0);
      std::size_t hits = 0;
      for (std::size_t sy = 0; sy < kSuper; ++sy)
        for (std::size_t sx = 0; sx < kSuper; ++sx)
          hits += inside(cls, g, x + (sx + 0.5) / kSuper, y + (sy + 0.5) / kSuper);
      const double a = static_cast<double>(hits) / (kSuper * kSuper);
      for (std::size_t c = 0; c < C; ++c) {
        const double back = (1 - t) * bg0[c] + t * bg1[c];
        img[(c * H + y) * W + x] = (1 - a) * back + a * fg[c];
      }
    }

  // Glyphs: 3x5 bitmaps at 1 px per cell, laid out in short text runs.
  const auto n_glyphs = static_cast<std::size_t>(
      std::lround(spec.glyph_density * 24.0 * static_cast<double>(H * W) / (64.0 * 64.0)));
  const Color ink = dark_bg ? Color{235, 235, 235} : Color{20, 20, 20};
  std::size_t drawn = 0;
  while (drawn < n_glyphs) {
    const std::size_t run = std::min<std::size_t>(n_glyphs - drawn, 2 + rng.below(5));
    std::size_t x0 = rng.below(W - 4);
    const std::size_t y0 = rng.below(H - 5);
    for (std::size_t k = 0; k < run && x0 + 3 <= W; ++k, x0 += 4) {
      const auto glyph = random_glyph(rng);
      for (std::size_t gy = 0; gy < 5; ++gy)
        for (std::size_t gx = 0; gx < 3; ++gx)
          if (glyph[gy * 3 + gx])
            for (std::size_t c = 0; c < C; ++c) img[(c * H + y0 + gy) * W + x0 + gx] = ink[c];
    }
    drawn += run;
  }

  Tensor4D out(Shape{1, C, H, W});
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = static_cast<Real>(std::round(std::clamp(img[i], 0.0, 255.0)));
  return out;
}

Dataset gen_dataset(const SceneSpec& spec, std::size_t count, std::uint64_t first_index) {
  spec.validate();
  FPC_CHECK(count >= 1, ArgumentError, "dataset count must be at least 1");
  Dataset ds;
  ds.images = Tensor4D(Shape{count, spec.channels, spec.height, spec.width});
  ds.labels.resize(count);
  const std::size_t per = spec.channels * spec.height * spec.width;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t index = first_index + i;
    ds.labels[i] = label_for(spec, index);
    const Tensor4D img = render_image(spec, index, ds.labels[i]);
    std::copy(img.data().begin(), img.data().end(), ds.images.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return ds;
}

std::vector<std::uint8_t> encode_fpt(const Tensor4D& t) {
  ByteWriter w;
  w.str("FPT0");
  for (std::size_t d : t.shape().as_array()) {
    FPC_CHECK(d <= UINT32_MAX, ArgumentError, "tensor dim does not fit u32");
    w.u32(static_cast<std::uint32_t>(d));
  }
  for (Real v : t.data()) w.f32(static_cast<float>(v));
  return w.take();
}

Tensor4D decode_fpt(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != "FPT0") throw DecodeError("bad magic, not an FPT0 tensor");
  Shape s;
  s.n = r.u32();
  s.c = r.u32();
  s.h = r.u32();
  s.w = r.u32();
  FPC_CHECK(r.remaining() == s.numel() * 4, DecodeError,
            "tensor payload holds " + std::to_string(r.remaining()) + " bytes, dims " + s.str() + " need " +
                std::to_string(s.numel() * 4));
  Tensor4D t(s);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<Real>(r.f32());
  return t;
}

void write_fpt(const std::filesystem::path& path, const Tensor4D& t) { write_file(path, encode_fpt(t)); }

Tensor4D read_fpt(const std::filesystem::path& path) {
  try {
    return decode_fpt(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  FPC_CHECK(ds.images.shape().n == ds.labels.size(), ShapeError, "label count does not match images");
  write_fpt(dir / "images.fpt", ds.images);
  std::string text;
  for (std::int32_t l : ds.labels) text += std::to_string(l) + "\n";
  write_text_file(dir / "labels.txt", text);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.images = read_fpt(dir / "images.fpt");
  std::istringstream in(read_text_file(dir / "labels.txt"));
  std::int32_t l;
  while (in >> l) ds.labels.push_back(l);
  FPC_CHECK(ds.images.shape().n == ds.labels.size(), DecodeError,
            dir.string() + ": " + std::to_string(ds.labels.size()) + " labels for " +
                std::to_string(ds.images.shape().n) + " images");
  return ds;
}

}  // namespace fpc::data
