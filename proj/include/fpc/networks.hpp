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
#include <memory>
#include <string>
#include <vector>

#include "fpc/autodiff.hpp"
#include "fpc/param_store.hpp"
#include "fpc/tensor.hpp"

namespace fpc::nets {

enum class LayerKind { Conv, Deconv, ResBlock, GlobalPool, Linear };

// One entry of a model's layer list. Conv/Deconv with use_bn and use_act are
// the usual conv -> batch-norm -> SiLU unit; ResBlock is
// y = x + conv3x3(SiLU(BN(conv3x3(x)))) with BN dropped when use_bn is false.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  bool use_bn = true;
  bool use_act = true;
  std::size_t repeat = 1;

  static LayerSpec conv(std::size_t n, std::size_t k, std::size_t s, bool bn = true, bool act = true);
  static LayerSpec deconv(std::size_t n, std::size_t k, std::size_t s, bool bn = true, bool act = true);
  static LayerSpec resblock(std::size_t n, std::size_t repeat = 1, bool bn = true);
  static LayerSpec global_pool();
  static LayerSpec linear(std::size_t n);
};

std::string to_string(LayerKind kind);

enum class Role { Frontend, AE, AD, Backend, RecNet };
std::string to_string(Role role);

enum class ForwardMode { Train, Eval };

// An ordered layer list with its parameters. Copying a ModelGraph deep-copies
// its parameters, which is how frozen snapshots are taken.
class ModelGraph {
 public:
  ModelGraph(Role role, std::size_t in_channels, std::vector<LayerSpec> layers, std::uint64_t seed);

  // Train mode runs batch-norm on batch statistics (updating the running
  // estimates) unless the model is frozen; frozen models always use running
  // statistics and record their parameters as constants.
  ad::Var forward(ad::Tape& tape, const ad::Var& x, ForwardMode mode);
  // Eval-mode pass; gradients still flow to `x` if it requires them.
  ad::Var forward_eval(ad::Tape& tape, const ad::Var& x) const;
  // Eval-mode forward pass that builds and discards its own tape.
  Tensor4D infer(const Tensor4D& x) const;
  Shape output_shape(const Shape& in) const;

  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }

  Role role() const { return role_; }
  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  ParamStore& params() { return *params_; }
  const ParamStore& params() const { return *params_; }

  ModelGraph(const ModelGraph& other);
  ModelGraph& operator=(const ModelGraph& other);
  ModelGraph(ModelGraph&&) noexcept = default;
  ModelGraph& operator=(ModelGraph&&) noexcept = default;

 private:
  void build(std::uint64_t seed);
  ad::Var run(ad::Tape& tape, const ad::Var& x, bool train) const;

  Role role_;
  std::size_t in_channels_;
  std::size_t out_channels_ = 0;
  std::vector<LayerSpec> layers_;
  // Heap-held so a Tape aliasing parameter storage survives moves of the graph.
  std::unique_ptr<ParamStore> params_;
  bool frozen_ = false;
};

struct SplitConfig {
  std::size_t input_h = 64;
  std::size_t input_w = 64;
  std::size_t input_channels = 3;
  std::size_t frontend_channels = 48;
  std::size_t bottleneck_channels = 16;
  std::size_t downsample_factor = 4;
  std::size_t num_classes = 4;
  std::size_t resblock_repeats = 1;

  void validate() const;
};

enum class RecNetVariant { Bottleneck, Latent };

struct ModelSet {
  ModelGraph frontend;
  ModelGraph ae;
  ModelGraph ad;
  ModelGraph backend;
  ModelGraph recnet;
};

ModelSet build_default_models(const SplitConfig& cfg, std::uint64_t seed);
// The latent variant drops the layers that mirror the AE and reads raw
// split-point features.
ModelGraph build_recnet(const SplitConfig& cfg, RecNetVariant variant, std::uint64_t seed);

void set_frozen(ModelGraph& model, bool frozen);

// Applies each stage in order. An empty stage list is the identity.
ad::Var forward_pipeline(ad::Tape& tape, const ad::Var& x, const std::vector<ModelGraph*>& stages,
                         ForwardMode mode);
Tensor4D infer_pipeline(const Tensor4D& x, const std::vector<const ModelGraph*>& stages);

// Standalone residual block forward used by tests: params must hold
// "conv1.weight", "conv2.weight", "conv2.bias" and, with BN, "bn.gamma",
// "bn.beta", "bn.running_mean", "bn.running_var" (plus "conv1.bias" without BN).
ad::Var resblock_forward(ad::Tape& tape, const ad::Var& x, ParamStore& params,
                         const std::string& prefix, bool use_bn, bool bn_training,
                         bool params_require_grad);

// Scales input pixels from [0, 255] to the [0, 1] range the networks see.
Tensor4D normalize_images(const Tensor4D& images_255);

}  // namespace fpc::nets
