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

#include <algorithm>
#include <cmath>
#include <set>

#include "fpc/codec.hpp"
#include "fpc/data.hpp"
#include "fpc/losses.hpp"
#include "fpc/rng.hpp"
#include "test_util.hpp"

namespace fpc::codec {
namespace {

using test_util::random_tensor;

Planes random_planes(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Planes p{s, std::vector<std::uint8_t>(s.numel())};
  for (auto& v : p.data) v = static_cast<std::uint8_t>(rng.below(256));
  return p;
}

GrayImage constant_image(std::size_t h, std::size_t w, std::uint8_t v) {
  return {h, w, std::vector<std::uint8_t>(h * w, v)};
}

// First channel of synthetic scene images, as 8-bit grayscale.
std::vector<GrayImage> scene_corpus(std::size_t count) {
  data::SceneSpec spec;
  const data::Dataset ds = data::gen_dataset(spec, count, 777);
  std::vector<GrayImage> out;
  const std::size_t plane = spec.height * spec.width;
  for (std::size_t n = 0; n < count; ++n) {
    GrayImage img{spec.height, spec.width, std::vector<std::uint8_t>(plane)};
    for (std::size_t k = 0; k < plane; ++k)
      img.pixels[k] = static_cast<std::uint8_t>(std::lround(ds.images[n * spec.channels * plane + k]));
    out.push_back(std::move(img));
  }
  return out;
}

double image_psnr(const GrayImage& a, const GrayImage& b) {
  double se = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    se += d * d;
  }
  if (se == 0) return loss::kInfinitePsnr;
  return 10 * std::log10(255.0 * 255.0 / (se / static_cast<double>(a.pixels.size())));
}

TEST(Quantize, FormulaExamples) {
  const ClipRange r{-3, 3};
  EXPECT_EQ(quantize_value(-3, r), 0);
  EXPECT_EQ(quantize_value(3, r), 255);
  EXPECT_EQ(quantize_value(0, r), 128);
  EXPECT_EQ(quantize_value(10, r), 255);
  EXPECT_EQ(quantize_value(-10, r), 0);
  EXPECT_DOUBLE_EQ(dequantize_value(0, r), -3);
  EXPECT_DOUBLE_EQ(dequantize_value(255, r), 3);
  EXPECT_NEAR(dequantize_value(128, r), 0.011764705882352941, 1e-15);
  EXPECT_THROW((ClipRange{1, 1}.validate()), ArgumentError);
}

TEST(Quantize, RoundTripBoundOnMillionValues) {
  for (const ClipRange r : {ClipRange{-6, 6}, ClipRange{-3, 3}, ClipRange{-1.5, 1.5}, ClipRange{0, 10}}) {
    Rng rng(99);
    double worst = 0;
    for (int i = 0; i < 1000000; ++i) {
      const double x = rng.uniform(r.lo - r.width() / 2, r.hi + r.width() / 2);
      const double back = dequantize_value(quantize_value(x, r), r);
      worst = std::max(worst, std::abs(back - std::clamp(x, r.lo, r.hi)));
    }
    EXPECT_LE(worst, r.max_error() * (1 + 1e-12));
  }
}

TEST(Tile, SingleChannelIsIdentity) {
  const Planes p = random_planes({1, 1, 3, 5}, 1);
  const GrayImage img = tile(p, {1, 1});
  EXPECT_EQ(img.height, 3u);
  EXPECT_EQ(img.width, 5u);
  EXPECT_EQ(img.pixels, p.data);
}

TEST(Tile, TwoByTwoIndexMap) {
  Planes p{{1, 4, 2, 2}, {}};
  for (std::uint8_t c = 0; c < 4; ++c)
    for (int k = 0; k < 4; ++k) p.data.push_back(static_cast<std::uint8_t>(10 * c + k));
  const GrayImage img = tile(p, {2, 2});
  ASSERT_EQ(img.height, 4u);
  ASSERT_EQ(img.width, 4u);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        EXPECT_EQ(img.at((c / 2) * 2 + i, (c % 2) * 2 + j), 10 * c + i * 2 + j);
  EXPECT_EQ(img.at(2, 0), 20);  // channel 2 starts block row 1, col 0
}

TEST(Tile, ReferenceGridShapes) {
  const GrayImage m = tile(random_planes({1, 64, 16, 16}, 2), {8, 8});
  EXPECT_EQ(m.height, 128u);
  EXPECT_EQ(m.width, 128u);
  EXPECT_EQ(TileGrid::for_channels(64), (TileGrid{8, 8}));
  EXPECT_EQ(TileGrid::for_channels(192), (TileGrid{12, 16}));
  EXPECT_EQ(TileGrid::for_channels(16), (TileGrid{4, 4}));
}

TEST(Tile, UntileInvertsForAllGrids) {
  for (const TileGrid g : {TileGrid{1, 1}, TileGrid{2, 2}, TileGrid{8, 8}, TileGrid{12, 16}}) {
    const Shape s{2, g.cells(), 5, 7};
    const Planes p = random_planes(s, g.cells());
    const Planes back = untile(tile(p, g), g, s.c, s.h, s.w);
    EXPECT_EQ(back.shape, s);
    EXPECT_EQ(back.data, p.data);
  }
}

TEST(Tile, GridMismatchErrors) {
  const Planes p = random_planes({1, 4, 2, 2}, 3);
  EXPECT_THROW(tile(p, {1, 3}), ArgumentError);
  const GrayImage img = tile(p, {2, 2});
  EXPECT_THROW(untile(img, {2, 2}, 4, 3, 2), ShapeError);
}

TEST(ExpGolomb, MappingAndLengths) {
  EXPECT_EQ(signed_to_ue(0), 0u);
  EXPECT_EQ(signed_to_ue(1), 1u);
  EXPECT_EQ(signed_to_ue(-1), 2u);
  EXPECT_EQ(signed_to_ue(8), 15u);
  EXPECT_EQ(signed_to_ue(-8), 16u);
  for (int v = -300; v <= 300; ++v) EXPECT_EQ(ue_to_signed(signed_to_ue(v)), v);
  EXPECT_EQ(exp_golomb_bits(0), 1u);
  EXPECT_EQ(exp_golomb_bits(1), 3u);
  EXPECT_EQ(exp_golomb_bits(2), 3u);
  EXPECT_EQ(exp_golomb_bits(15), 9u);
  EXPECT_EQ(exp_golomb_bits(16), 9u);
}

TEST(Zigzag, IsAPermutationWithStandardStart) {
  const auto& z = zigzag_order();
  EXPECT_EQ(std::set<std::uint8_t>(z.begin(), z.end()).size(), 64u);
  const std::vector<std::uint8_t> head(z.begin(), z.begin() + 10);
  EXPECT_EQ(head, (std::vector<std::uint8_t>{0, 1, 8, 16, 9, 2, 3, 10, 17, 24}));
  EXPECT_EQ(z[63], 63);
}

TEST(IntraCodec, QuantizerStep) {
  EXPECT_DOUBLE_EQ(qstep(4), 1.0);
  EXPECT_DOUBLE_EQ(qstep(10), 2.0);
  EXPECT_NEAR(qstep(34), 32.0, 1e-12);
}

TEST(IntraCodec, FlatImageCostsOneBitPerCoefficient) {
  const GrayImage img = constant_image(16, 16, 128);
  for (int qp = 0; qp <= kMaxQp; ++qp) {
    const auto payload = intra_encode(img, qp);
    EXPECT_EQ(payload.size(), 4u * 64u / 8u);
    EXPECT_EQ(intra_decode(payload, 16, 16, qp), img) << "qp " << qp;
  }
}

TEST(IntraCodec, ConstantBlockDcLevel) {
  // DC of an 8x8 block of 129 after level shift is 8 * 1 = 8; at qp 4 its
  // level 8 maps to 15, a 9-bit code, followed by 63 one-bit zeros.
  const auto payload = intra_encode(constant_image(8, 8, 129), 4);
  EXPECT_EQ(payload.size(), 9u);
  EXPECT_EQ(intra_decode(payload, 8, 8, 4), constant_image(8, 8, 129));
}

TEST(IntraCodec, FineQuantizationErrorBound) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Planes p = random_planes({1, 1, 24, 40}, 50 + seed);
    const GrayImage img{24, 40, p.data};
    const GrayImage back = intra_decode(intra_encode(img, 4), 24, 40, 4);
    int worst = 0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      worst = std::max(worst, std::abs(static_cast<int>(img.pixels[i]) - back.pixels[i]));
    EXPECT_LE(worst, 2);
  }
}

TEST(IntraCodec, PadsOddSizes) {
  const Planes p = random_planes({1, 1, 10, 13}, 4);
  const GrayImage img{10, 13, p.data};
  const auto payload = intra_encode(img, 20);
  const GrayImage back = intra_decode(payload, 10, 13, 20);
  EXPECT_EQ(back.height, 10u);
  EXPECT_EQ(back.width, 13u);
  EXPECT_GT(image_psnr(img, back), 20);
}

TEST(IntraCodec, DeterministicAndRejectsBadInput) {
  const auto corpus = scene_corpus(2);
  const auto a = intra_encode(corpus[0], 36), b = intra_encode(corpus[0], 36);
  EXPECT_EQ(a, b);
  EXPECT_EQ(intra_decode(a, 64, 64, 36), intra_decode(b, 64, 64, 36));
  EXPECT_THROW(intra_encode(corpus[0], 52), ArgumentError);
  EXPECT_THROW(intra_encode(corpus[0], -1), ArgumentError);
  const std::vector<std::uint8_t> truncated(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2));
  EXPECT_THROW(intra_decode(truncated, 64, 64, 36), DecodeError);
}

TEST(IntraCodec, RateAndQualityMonotoneOverSweepQps) {
  const auto corpus = scene_corpus(20);
  double prev_bits = 1e300, prev_psnr = 1e300;
  for (int qp : {34, 36, 38, 40, 41, 42}) {
    double bits = 0, psnr = 0;
    for (const GrayImage& img : corpus) {
      const auto payload = intra_encode(img, qp);
      bits += 8.0 * static_cast<double>(payload.size());
      psnr += image_psnr(img, intra_decode(payload, img.height, img.width, qp));
    }
    bits /= 20;
    psnr /= 20;
    EXPECT_LE(bits, prev_bits) << "qp " << qp;
    EXPECT_LE(psnr, prev_psnr) << "qp " << qp;
    prev_bits = bits;
    prev_psnr = psnr;
  }
}

TEST(NullCodec, BitExactAndRate) {
  const Planes p = random_planes({1, 1, 6, 9}, 5);
  const GrayImage img{6, 9, p.data};
  EXPECT_EQ(null_decode(null_encode(img), 6, 9), img);
  EXPECT_TRUE(null_encode(GrayImage{}).empty());

  const Tensor4D feat = random_tensor({1, 64, 16, 16}, 6, -2, 2);
  const FeatureBitstream bs = encode_features(feat, {-3, 3}, {8, 8}, CodecId::Null, 0);
  EXPECT_EQ(bs.payload.size(), 128u * 128u);
  EXPECT_DOUBLE_EQ(bits_per_pixel(bs, 64 * 64), 32.0);
}

TEST(FeatureChain, NullCodecOnlyLosesQuantization) {
  const ClipRange r{-1.5, 1.5};
  const Tensor4D t = random_tensor({2, 16, 8, 8}, 7, -2.5, 2.5);
  const Tensor4D back = decode_features(encode_features(t, r, {4, 4}, CodecId::Null, 0));
  ASSERT_EQ(back.shape(), t.shape());
  // Values travel as 32-bit floats, so allow float rounding on top of the bound.
  for (std::size_t i = 0; i < t.numel(); ++i)
    EXPECT_LE(std::abs(back[i] - std::clamp<double>(t[i], r.lo, r.hi)), r.max_error() + 1e-6);
}

TEST(FeatureChain, HeaderRoundTripIsByteIdentical) {
  FeatureHeader h;
  h.codec = CodecId::DctIntra;
  h.qp = 41;
  h.clip_lo = -6;
  h.clip_hi = 6;
  h.n = 1;
  h.c = 192;
  h.h = 16;
  h.w = 16;
  h.tile_rows = 12;
  h.tile_cols = 16;
  h.payload_len = 77;
  const auto bytes = serialize_header(h);
  ASSERT_EQ(bytes.size(), FeatureHeader::kSize);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FPFC");
  EXPECT_EQ(parse_header(bytes), h);
  EXPECT_EQ(serialize_header(parse_header(bytes)), bytes);

  const Tensor4D t = random_tensor({1, 16, 8, 8}, 8);
  const FeatureBitstream bs = encode_features(t, {-3, 3}, {4, 4}, CodecId::DctIntra, 36);
  const auto wire = bs.serialize();
  EXPECT_EQ(wire.size(), FeatureHeader::kSize + bs.payload.size());
  EXPECT_EQ(FeatureBitstream::parse(wire).serialize(), wire);
}

TEST(FeatureChain, RejectsCorruptBitstreams) {
  const FeatureBitstream bs = encode_features(random_tensor({1, 4, 8, 8}, 9), {-3, 3}, {2, 2}, CodecId::DctIntra, 30);
  auto wire = bs.serialize();
  auto bad = wire;
  bad[0] = 'X';
  EXPECT_THROW(FeatureBitstream::parse(bad), DecodeError);
  bad = wire;
  bad.pop_back();
  EXPECT_THROW(FeatureBitstream::parse(bad), DecodeError);
  bad = wire;
  bad[6] = 60;  // qp byte
  EXPECT_THROW(FeatureBitstream::parse(bad), DecodeError);
}

TEST(FeatureChain, StageTagsOnErrors) {
  const Tensor4D t = random_tensor({1, 4, 8, 8}, 10);
  try {
    encode_features(t, {-3, 3}, {1, 3}, CodecId::DctIntra, 30);
    FAIL() << "expected a tile error";
  } catch (const CodecError& e) {
    EXPECT_EQ(e.stage(), "tile");
  }
  FeatureBitstream bs = encode_features(t, {-3, 3}, {2, 2}, CodecId::DctIntra, 30);
  bs.payload.resize(bs.payload.size() / 2);
  bs.header.payload_len = static_cast<std::uint32_t>(bs.payload.size());
  try {
    decode_features(bs);
    FAIL() << "expected a codec error";
  } catch (const CodecError& e) {
    EXPECT_EQ(e.stage(), "codec");
  }
}

TEST(FeatureChain, SweepQpsShrinkPayload) {
  const Tensor4D feat = random_tensor({1, 16, 16, 16}, 4242, -3, 3);
  const TileGrid g = TileGrid::for_channels(feat.shape().c);
  std::size_t prev = SIZE_MAX;
  for (int qp : {34, 36, 38, 40, 41, 42}) {
    const FeatureBitstream bs = encode_features(feat, {-3, 3}, g, CodecId::DctIntra, qp);
    EXPECT_LT(bs.payload.size(), prev) << "qp " << qp;
    prev = bs.payload.size();
    EXPECT_EQ(decode_features(bs).shape(), feat.shape());
  }
}

TEST(Pgm, RoundTrip) {
  const auto dir = test_util::scratch_dir("pgm");
  const Planes p = random_planes({1, 1, 7, 11}, 12);
  const GrayImage img{7, 11, p.data};
  write_pgm(dir / "a.pgm", img);
  EXPECT_EQ(read_pgm(dir / "a.pgm"), img);
}

}  // namespace
}  // namespace fpc::codec
