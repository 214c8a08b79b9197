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

#include <cctype>
#include <cmath>
#include <limits>

#include "fpc/byte_io.hpp"
#include "fpc/codec.hpp"

namespace fpc::codec {
namespace {

constexpr std::string_view kMagic = "FPFC";
constexpr std::uint8_t kVersion = 1;

template <typename T>
T narrow(std::size_t v, const char* what) {
  if (v > std::numeric_limits<T>::max())
    throw ArgumentError(std::string(what) + " " + std::to_string(v) + " does not fit the header field");
  return static_cast<T>(v);
}

}  // namespace

std::vector<std::uint8_t> serialize_header(const FeatureHeader& h) {
  ByteWriter w;
  w.str(kMagic);
  w.u8(h.version);
  w.u8(static_cast<std::uint8_t>(h.codec));
  w.u8(h.qp);
  w.f32(h.clip_lo);
  w.f32(h.clip_hi);
  w.u16(h.n);
  w.u16(h.c);
  w.u16(h.h);
  w.u16(h.w);
  w.u8(h.tile_rows);
  w.u8(h.tile_cols);
  w.u32(h.payload_len);
  return w.take();
}

FeatureHeader parse_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(kMagic.size()) != kMagic) throw DecodeError("bad magic, not an FPFC bitstream");
  FeatureHeader h;
  h.version = r.u8();
  if (h.version != kVersion) throw DecodeError("unsupported FPFC version " + std::to_string(h.version));
  const std::uint8_t codec = r.u8();
  if (codec > static_cast<std::uint8_t>(CodecId::DctIntra))
    throw DecodeError("unknown codec id " + std::to_string(codec));
  h.codec = static_cast<CodecId>(codec);
  h.qp = r.u8();
  if (h.qp > kMaxQp) throw DecodeError("qp " + std::to_string(h.qp) + " out of range");
  h.clip_lo = r.f32();
  h.clip_hi = r.f32();
  if (!(std::isfinite(h.clip_lo) && std::isfinite(h.clip_hi) && h.clip_lo < h.clip_hi))
    throw DecodeError("invalid clip range in header");
  h.n = r.u16();
  h.c = r.u16();
  h.h = r.u16();
  h.w = r.u16();
  h.tile_rows = r.u8();
  h.tile_cols = r.u8();
  if (static_cast<std::size_t>(h.tile_rows) * h.tile_cols != h.c)
    throw DecodeError("tile grid does not cover the channel count");
  h.payload_len = r.u32();
  return h;
}

std::vector<std::uint8_t> FeatureBitstream::serialize() const {
  FPC_CHECK(header.payload_len == payload.size(), StateError, "payload_len disagrees with payload");
  auto out = serialize_header(header);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

FeatureBitstream FeatureBitstream::parse(std::span<const std::uint8_t> bytes) {
  FeatureBitstream bs;
  bs.header = parse_header(bytes);
  ByteReader r(bytes.subspan(std::min(bytes.size(), FeatureHeader::kSize)));
  const auto p = r.bytes(bs.header.payload_len);
  if (!r.done()) throw DecodeError(std::to_string(r.remaining()) + " trailing bytes after payload");
  bs.payload.assign(p.begin(), p.end());
  return bs;
}

FeatureBitstream encode_features(const Tensor4D& t, const ClipRange& r, const TileGrid& g,
                                 const IntraCodec& codec, int qp) {
  FeatureBitstream bs;
  FeatureHeader& h = bs.header;
  try {
    r.validate();
    const Shape& s = t.shape();
    h.version = kVersion;
    h.codec = codec.id();
    h.qp = narrow<std::uint8_t>(static_cast<std::size_t>(std::max(qp, 0)), "qp");
    FPC_CHECK(qp >= 0 && qp <= kMaxQp, ArgumentError, "qp " + std::to_string(qp) + " out of range");
    h.clip_lo = static_cast<float>(r.lo);
    h.clip_hi = static_cast<float>(r.hi);
    FPC_CHECK(h.clip_lo < h.clip_hi, ArgumentError, "clip range collapses in 32-bit precision");
    h.n = narrow<std::uint16_t>(s.n, "batch");
    h.c = narrow<std::uint16_t>(s.c, "channels");
    h.h = narrow<std::uint16_t>(s.h, "height");
    h.w = narrow<std::uint16_t>(s.w, "width");
    h.tile_rows = narrow<std::uint8_t>(g.rows, "tile rows");
    h.tile_cols = narrow<std::uint8_t>(g.cols, "tile cols");
  } catch (const Error& e) {
    throw CodecError("header", e.what());
  }
  Planes planes;
  try {
    planes = clip_quantize(t, h.clip());
  } catch (const Error& e) {
    throw CodecError("quantize", e.what());
  }
  GrayImage mosaic;
  try {
    mosaic = tile(planes, g);
  } catch (const Error& e) {
    throw CodecError("tile", e.what());
  }
  try {
    bs.payload = codec.encode(mosaic, qp);
    h.payload_len = narrow<std::uint32_t>(bs.payload.size(), "payload length");
  } catch (const Error& e) {
    throw CodecError("codec", e.what());
  }
  return bs;
}

FeatureBitstream encode_features(const Tensor4D& t, const ClipRange& r, const TileGrid& g,
                                 CodecId codec_id, int qp) {
  return encode_features(t, r, g, codec_for(codec_id), qp);
}

Tensor4D decode_features(const FeatureBitstream& bs, const IntraCodec& codec) {
  const FeatureHeader& h = bs.header;
  if (codec.id() != h.codec)
    throw CodecError("header", "bitstream codec " + to_string(h.codec) + " handed to " + to_string(codec.id()));
  if (h.payload_len != bs.payload.size()) throw CodecError("header", "payload_len disagrees with payload");
  const TileGrid g = h.grid();
  GrayImage mosaic;
  try {
    mosaic = codec.decode(bs.payload, static_cast<std::size_t>(h.n) * g.rows * h.h, g.cols * h.w, h.qp);
  } catch (const Error& e) {
    throw CodecError("codec", e.what());
  }
  Planes planes;
  try {
    planes = untile(mosaic, g, h.c, h.h, h.w);
  } catch (const Error& e) {
    throw CodecError("untile", e.what());
  }
  if (h.n == 0) planes.shape = Shape{0, h.c, h.h, h.w};
  try {
    return dequantize(planes, h.clip());
  } catch (const Error& e) {
    throw CodecError("dequantize", e.what());
  }
}

Tensor4D decode_features(const FeatureBitstream& bs) {
  if (bs.header.codec > CodecId::DctIntra) throw CodecError("header", "unknown codec id");
  return decode_features(bs, codec_for(bs.header.codec));
}

double bits_per_pixel(const FeatureBitstream& bs, std::size_t source_pixels) {
  FPC_CHECK(source_pixels > 0, ArgumentError, "bits_per_pixel needs a positive pixel count");
  return static_cast<double>(bs.payload_bits()) / static_cast<double>(source_pixels);
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  FPC_CHECK(img.pixels.size() == img.height * img.width, ShapeError, "image pixel count mismatch");
  ByteWriter w;
  w.str("P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n");
  w.bytes(img.pixels);
  write_file(path, w.buffer());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    if (t.empty()) throw DecodeError(path.string() + ": truncated PGM header");
    return t;
  };
  if (token() != "P5") throw DecodeError(path.string() + ": not a binary PGM");
  GrayImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (std::stoul(token()) != 255) throw DecodeError(path.string() + ": only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw DecodeError(path.string() + ": malformed PGM header");
  }
  ++pos;
  if (bytes.size() - std::min(pos, bytes.size()) != img.width * img.height)
    throw DecodeError(path.string() + ": pixel data size mismatch");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

}  // namespace fpc::codec
