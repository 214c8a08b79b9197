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
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fpc/error.hpp"
#include "fpc/tensor.hpp"

namespace fpc::codec {

struct ClipRange {
  double lo = -3.0;
  double hi = 3.0;

  void validate() const;
  double width() const { return hi - lo; }
  // Bound on |dequantize(quantize(x)) - clamp(x)|: half a quantization step.
  double max_error() const { return width() / 510.0; }

  static ClipRange symmetric(double a) { return {-a, a}; }
  friend bool operator==(const ClipRange&, const ClipRange&) = default;
};

struct TileGrid {
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t cells() const { return rows * cols; }
  // Most square factorization with rows <= cols (64 -> 8x8, 192 -> 12x16).
  static TileGrid for_channels(std::size_t channels);
  friend bool operator==(const TileGrid&, const TileGrid&) = default;
};

// 8-bit samples laid out N x C x H x W.
struct Planes {
  Shape shape;
  std::vector<std::uint8_t> data;
};

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// q = clamp(round_half_away((x - lo) * 255 / (hi - lo)), 0, 255)
std::uint8_t quantize_value(double x, const ClipRange& r);
double dequantize_value(std::uint8_t q, const ClipRange& r);
Planes clip_quantize(const Tensor4D& t, const ClipRange& r);
Tensor4D dequantize(const Planes& q, const ClipRange& r);

// Channel c of sample n lands in tile (c / cols, c % cols) of the n-th mosaic;
// mosaics of successive samples are stacked vertically.
GrayImage tile(const Planes& planes, const TileGrid& g);
Planes untile(const GrayImage& img, const TileGrid& g, std::size_t c, std::size_t h, std::size_t w);

enum class CodecId : std::uint8_t { Null = 0, DctIntra = 1 };
std::string to_string(CodecId id);
CodecId codec_from_string(const std::string& name);

inline constexpr int kMaxQp = 51;
// Quantizer step of the DCT intra codec: 2^((qp - 4) / 6).
double qstep(int qp);

// Grayscale still-image codec. New codecs (e.g. an adapter around an external
// encoder binary) implement this and are handed to encode_features directly.
class IntraCodec {
 public:
  virtual ~IntraCodec() = default;
  virtual CodecId id() const = 0;
  virtual std::vector<std::uint8_t> encode(const GrayImage& img, int qp) const = 0;
  virtual GrayImage decode(std::span<const std::uint8_t> payload, std::size_t height,
                           std::size_t width, int qp) const = 0;
};

const IntraCodec& codec_for(CodecId id);

// 8x8 block DCT codec: level shift, orthonormal DCT-II, uniform quantization
// with qstep(qp), zigzag scan, signed order-0 Exp-Golomb for all 64
// coefficients. Images are padded to multiples of 8 with the value 128.
std::vector<std::uint8_t> intra_encode(const GrayImage& img, int qp);
GrayImage intra_decode(std::span<const std::uint8_t> payload, std::size_t height,
                       std::size_t width, int qp);

std::vector<std::uint8_t> null_encode(const GrayImage& img);
GrayImage null_decode(std::span<const std::uint8_t> payload, std::size_t height, std::size_t width);

// Exposed for tests.
std::uint32_t signed_to_ue(std::int32_t v);
std::int32_t ue_to_signed(std::uint32_t u);
std::size_t exp_golomb_bits(std::uint32_t u);
const std::array<std::uint8_t, 64>& zigzag_order();

struct FeatureHeader {
  std::uint8_t version = 1;
  CodecId codec = CodecId::DctIntra;
  std::uint8_t qp = 0;
  float clip_lo = -3.0f;
  float clip_hi = 3.0f;
  std::uint16_t n = 0, c = 0, h = 0, w = 0;
  std::uint8_t tile_rows = 1, tile_cols = 1;
  std::uint32_t payload_len = 0;

  static constexpr std::size_t kSize = 29;
  ClipRange clip() const { return {clip_lo, clip_hi}; }
  TileGrid grid() const { return {tile_rows, tile_cols}; }
  friend bool operator==(const FeatureHeader&, const FeatureHeader&) = default;
};

// "FPFC" | version u8 | codec u8 | qp u8 | clip lo f32 | clip hi f32 |
// n,c,h,w u16 | tile rows,cols u8 | payload_len u32 | payload. Little-endian.
struct FeatureBitstream {
  FeatureHeader header;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> serialize() const;
  static FeatureBitstream parse(std::span<const std::uint8_t> bytes);
  std::size_t payload_bits() const { return payload.size() * 8; }
};

std::vector<std::uint8_t> serialize_header(const FeatureHeader& h);
FeatureHeader parse_header(std::span<const std::uint8_t> bytes);

// Raised by the feature chain with the name of the failing stage.
class CodecError : public Error {
 public:
  CodecError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

FeatureBitstream encode_features(const Tensor4D& t, const ClipRange& r, const TileGrid& g,
                                 const IntraCodec& codec, int qp);
FeatureBitstream encode_features(const Tensor4D& t, const ClipRange& r, const TileGrid& g,
                                 CodecId codec_id, int qp);
Tensor4D decode_features(const FeatureBitstream& bs, const IntraCodec& codec);
Tensor4D decode_features(const FeatureBitstream& bs);

// Payload bits per source-image pixel.
double bits_per_pixel(const FeatureBitstream& bs, std::size_t source_pixels);

void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace fpc::codec
