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
#include <bit>
#include <cmath>
#include <numbers>

#include "fpc/codec.hpp"

namespace fpc::codec {
namespace {

constexpr std::size_t kBlock = 8;

class BitWriter {
 public:
  void put(std::uint32_t value, std::size_t nbits) {
    for (std::size_t i = nbits; i-- > 0;) put_bit((value >> i) & 1u);
  }
  void put_bit(std::uint32_t b) {
    acc_ = static_cast<std::uint8_t>((acc_ << 1) | b);
    if (++fill_ == 8) {
      bytes_.push_back(acc_);
      acc_ = 0;
      fill_ = 0;
    }
  }
  void put_ue(std::uint32_t u) {
    const std::uint64_t v = static_cast<std::uint64_t>(u) + 1;
    const std::size_t m = static_cast<std::size_t>(std::bit_width(v)) - 1;
    for (std::size_t i = 0; i < m; ++i) put_bit(0);
    for (std::size_t i = m + 1; i-- > 0;) put_bit(static_cast<std::uint32_t>((v >> i) & 1u));
  }
  // Zero-pads the final partial byte.
  std::vector<std::uint8_t> finish() {
    if (fill_ > 0) {
      bytes_.push_back(static_cast<std::uint8_t>(acc_ << (8 - fill_)));
      acc_ = 0;
      fill_ = 0;
    }
    return std::move(bytes_);
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint8_t acc_ = 0;
  std::size_t fill_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint32_t get_bit() {
    if (pos_ >= data_.size() * 8) throw DecodeError("truncated payload at bit " + std::to_string(pos_));
    const std::uint32_t b = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return b;
  }
  std::uint32_t get_ue() {
    std::size_t zeros = 0;
    while (get_bit() == 0) {
      if (++zeros > 32) throw DecodeError("malformed Exp-Golomb code");
    }
    std::uint64_t v = 1;
    for (std::size_t i = 0; i < zeros; ++i) v = (v << 1) | get_bit();
    if (v - 1 > UINT32_MAX) throw DecodeError("Exp-Golomb value out of range");
    return static_cast<std::uint32_t>(v - 1);
  }
  std::size_t bits_consumed() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// basis[u][x] = a(u) cos((2x + 1) u pi / 16)
const std::array<std::array<double, kBlock>, kBlock>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, kBlock>, kBlock> b{};
    for (std::size_t u = 0; u < kBlock; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (std::size_t x = 0; x < kBlock; ++x)
        b[u][x] = a * std::cos((2.0 * static_cast<double>(x) + 1.0) * static_cast<double>(u) *
                               std::numbers::pi / 16.0);
    }
    return b;
  }();
  return basis;
}

using Block = std::array<double, kBlock * kBlock>;

Block forward_dct(const Block& px) {
  const auto& B = dct_basis();
  Block tmp{}, out{};
  for (std::size_t y = 0; y < kBlock; ++y)
    for (std::size_t u = 0; u < kBlock; ++u) {
      double acc = 0;
      for (std::size_t x = 0; x < kBlock; ++x) acc += B[u][x] * px[y * kBlock + x];
      tmp[y * kBlock + u] = acc;
    }
  for (std::size_t v = 0; v < kBlock; ++v)
    for (std::size_t u = 0; u < kBlock; ++u) {
      double acc = 0;
      for (std::size_t y = 0; y < kBlock; ++y) acc += B[v][y] * tmp[y * kBlock + u];
      out[v * kBlock + u] = acc;
    }
  return out;
}

Block inverse_dct(const Block& coef) {
  const auto& B = dct_basis();
  Block tmp{}, out{};
  for (std::size_t v = 0; v < kBlock; ++v)
    for (std::size_t x = 0; x < kBlock; ++x) {
      double acc = 0;
      for (std::size_t u = 0; u < kBlock; ++u) acc += B[u][x] * coef[v * kBlock + u];
      tmp[v * kBlock + x] = acc;
    }
  for (std::size_t y = 0; y < kBlock; ++y)
    for (std::size_t x = 0; x < kBlock; ++x) {
      double acc = 0;
      for (std::size_t v = 0; v < kBlock; ++v) acc += B[v][y] * tmp[v * kBlock + x];
      out[y * kBlock + x] = acc;
    }
  return out;
}

std::size_t padded(std::size_t n) { return (n + kBlock - 1) / kBlock * kBlock; }

void check_qp(int qp) {
  FPC_CHECK(qp >= 0 && qp <= kMaxQp, ArgumentError,
            "qp " + std::to_string(qp) + " outside [0, " + std::to_string(kMaxQp) + "]");
}

class NullCodec final : public IntraCodec {
 public:
  CodecId id() const override { return CodecId::Null; }
  std::vector<std::uint8_t> encode(const GrayImage& img, int) const override { return null_encode(img); }
  GrayImage decode(std::span<const std::uint8_t> payload, std::size_t h, std::size_t w,
                   int) const override {
    return null_decode(payload, h, w);
  }
};

class DctIntraCodec final : public IntraCodec {
 public:
  CodecId id() const override { return CodecId::DctIntra; }
  std::vector<std::uint8_t> encode(const GrayImage& img, int qp) const override {
    return intra_encode(img, qp);
  }
  GrayImage decode(std::span<const std::uint8_t> payload, std::size_t h, std::size_t w,
                   int qp) const override {
    return intra_decode(payload, h, w, qp);
  }
};

}  // namespace

std::string to_string(CodecId id) {
  switch (id) {
    case CodecId::Null: return "null";
    case CodecId::DctIntra: return "dct";
  }
  return "unknown";
}

CodecId codec_from_string(const std::string& name) {
  if (name == "null" || name == "0") return CodecId::Null;
  if (name == "dct" || name == "1") return CodecId::DctIntra;
  throw ArgumentError("unknown codec '" + name + "' (expected null or dct)");
}

double qstep(int qp) {
  check_qp(qp);
  return std::exp2((qp - 4) / 6.0);
}

const IntraCodec& codec_for(CodecId id) {
  static const NullCodec null_codec;
  static const DctIntraCodec dct_codec;
  switch (id) {
    case CodecId::Null: return null_codec;
    case CodecId::DctIntra: return dct_codec;
  }
  throw ArgumentError("unknown codec id " + std::to_string(static_cast<int>(id)));
}

std::uint32_t signed_to_ue(std::int32_t v) {
  if (v > 0) return 2u * static_cast<std::uint32_t>(v) - 1u;
  return 2u * static_cast<std::uint32_t>(-static_cast<std::int64_t>(v));
}

std::int32_t ue_to_signed(std::uint32_t u) {
  if (u == 0) return 0;
  if (u & 1u) return static_cast<std::int32_t>((u + 1u) / 2u);
  return -static_cast<std::int32_t>(u / 2u);
}

std::size_t exp_golomb_bits(std::uint32_t u) {
  return 2 * (static_cast<std::size_t>(std::bit_width(static_cast<std::uint64_t>(u) + 1)) - 1) + 1;
}

const std::array<std::uint8_t, 64>& zigzag_order() {
  static const auto order = [] {
    std::array<std::uint8_t, 64> z{};
    std::size_t i = 0;
    for (std::size_t s = 0; s < 2 * kBlock - 1; ++s) {
      // Even anti-diagonals run bottom-left to top-right.
      for (std::size_t k = 0; k <= s; ++k) {
        const std::size_t row = (s % 2 == 0) ? s - k : k;
        const std::size_t col = s - row;
        if (row < kBlock && col < kBlock) z[i++] = static_cast<std::uint8_t>(row * kBlock + col);
      }
    }
    return z;
  }();
  return order;
}

std::vector<std::uint8_t> intra_encode(const GrayImage& img, int qp) {
  const double step = qstep(qp);
  FPC_CHECK(img.pixels.size() == img.height * img.width, ShapeError, "image pixel count mismatch");
  const std::size_t ph = padded(img.height), pw = padded(img.width);
  const auto& zz = zigzag_order();
  BitWriter bw;
  for (std::size_t by = 0; by < ph; by += kBlock)
    for (std::size_t bx = 0; bx < pw; bx += kBlock) {
      Block px{};
      for (std::size_t y = 0; y < kBlock; ++y)
        for (std::size_t x = 0; x < kBlock; ++x) {
          const std::size_t iy = by + y, ix = bx + x;
          const int v = (iy < img.height && ix < img.width) ? img.at(iy, ix) : 128;
          px[y * kBlock + x] = v - 128;
        }
      const Block coef = forward_dct(px);
      for (std::uint8_t pos : zz) {
        const auto level = static_cast<std::int32_t>(std::round(coef[pos] / step));
        bw.put_ue(signed_to_ue(level));
      }
    }
  return bw.finish();
}

GrayImage intra_decode(std::span<const std::uint8_t> payload, std::size_t height,
                       std::size_t width, int qp) {
  const double step = qstep(qp);
  const std::size_t ph = padded(height), pw = padded(width);
  const auto& zz = zigzag_order();
  GrayImage img{height, width, std::vector<std::uint8_t>(height * width)};
  BitReader br(payload);
  for (std::size_t by = 0; by < ph; by += kBlock)
    for (std::size_t bx = 0; bx < pw; bx += kBlock) {
      Block coef{};
      for (std::uint8_t pos : zz) coef[pos] = ue_to_signed(br.get_ue()) * step;
      const Block px = inverse_dct(coef);
      for (std::size_t y = 0; y < kBlock; ++y)
        for (std::size_t x = 0; x < kBlock; ++x) {
          const std::size_t iy = by + y, ix = bx + x;
          if (iy >= height || ix >= width) continue;
          const double v = std::round(px[y * kBlock + x] + 128.0);
          img.at(iy, ix) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
  FPC_CHECK((br.bits_consumed() + 7) / 8 == payload.size(), DecodeError,
            "payload has " + std::to_string(payload.size() - (br.bits_consumed() + 7) / 8) +
                " trailing bytes");
  return img;
}

std::vector<std::uint8_t> null_encode(const GrayImage& img) {
  FPC_CHECK(img.pixels.size() == img.height * img.width, ShapeError, "image pixel count mismatch");
  return img.pixels;
}

GrayImage null_decode(std::span<const std::uint8_t> payload, std::size_t height, std::size_t width) {
  FPC_CHECK(payload.size() == height * width, DecodeError,
            "raw payload of " + std::to_string(payload.size()) + " bytes for a " +
                std::to_string(height) + "x" + std::to_string(width) + " image");
  return GrayImage{height, width, std::vector<std::uint8_t>(payload.begin(), payload.end())};
}

}  // namespace fpc::codec
