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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fpc/tensor.hpp"

namespace fpc::data {

enum class ShapeClass { Circle = 0, Square = 1, Triangle = 2, Cross = 3, Diamond = 4, Ring = 5 };
inline constexpr std::size_t kMaxClasses = 6;
std::string to_string(ShapeClass c);

// One shape class per image plus small text-like glyphs standing in for
// private fine detail.
struct SceneSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 3;
  std::size_t num_classes = 4;
  double glyph_density = 1.0;  // 1.0 draws about 24 glyphs on a 64x64 image
  std::uint64_t seed = 0;

  void validate() const;
};

struct Dataset {
  Tensor4D images;  // N x C x H x W on the [0, 255] scale
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
  Dataset subset(std::size_t first, std::size_t count) const;
};

// Class of image `index`. Every aligned run of num_classes indices holds each
// class exactly once, in a seeded order.
std::int32_t label_for(const SceneSpec& spec, std::uint64_t index);
// 1 x C x H x W image, a pure function of (spec, index).
Tensor4D render_image(const SceneSpec& spec, std::uint64_t index, std::int32_t label);
Dataset gen_dataset(const SceneSpec& spec, std::size_t count, std::uint64_t first_index = 0);

// "FPT0" | n,c,h,w u32 | f32 values, little-endian.
void write_fpt(const std::filesystem::path& path, const Tensor4D& t);
Tensor4D read_fpt(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_fpt(const Tensor4D& t);
Tensor4D decode_fpt(std::span<const std::uint8_t> bytes);

// images.fpt plus labels.txt (one label per line) inside `dir`.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace fpc::data
