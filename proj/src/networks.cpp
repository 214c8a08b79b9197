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

#include "fpc/networks.hpp"

#include <cmath>

#include "fpc/error.hpp"
#include "fpc/kernels.hpp"
#include "fpc/rng.hpp"

namespace fpc::nets {

LayerSpec LayerSpec::conv(std::size_t n, std::size_t k, std::size_t s, bool bn, bool act) {
  return LayerSpec{LayerKind::Conv, n, k, s, k / 2, bn, act, 1};
}

LayerSpec LayerSpec::deconv(std::size_t n, std::size_t k, std::size_t s, bool bn, bool act) {
  return LayerSpec{LayerKind::Deconv, n, k, s, (k - s) / 2, bn, act, 1};
}

LayerSpec LayerSpec::resblock(std::size_t n, std::size_t repeat, bool bn) {
  return LayerSpec{LayerKind::ResBlock, n, 3, 1, 1, bn, true, repeat};
}

LayerSpec LayerSpec::global_pool() { return LayerSpec{LayerKind::GlobalPool, 0, 1, 1, 0, false, false, 1}; }

LayerSpec LayerSpec::linear(std::size_t n) { return LayerSpec{LayerKind::Linear, n, 1, 1, 0, false, false, 1}; }

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "Conv";
    case LayerKind::Deconv: return "Deconv";
    case LayerKind::ResBlock: return "ResBlock";
    case LayerKind::GlobalPool: return "GlobalPool";
    case LayerKind::Linear: return "Linear";
  }
  return "?";
}

std::string to_string(Role role) {
  switch (role) {
    case Role::Frontend: return "frontend";
    case Role::AE: return "ae";
    case Role::AD: return "ad";
    case Role::Backend: return "backend";
    case Role::RecNet: return "recnet";
  }
  return "?";
}

namespace {

// Kaiming-uniform; gain sqrt(2) ahead of an activation, 1 otherwise.
void init_uniform(Tensor4D& t, std::size_t fan_in, bool activated, Rng& rng) {
  const double gain2 = activated ? 2.0 : 1.0;
  const double bound = std::sqrt(3.0 * gain2 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
}

void add_bn(ParamStore& ps, const std::string& prefix, std::size_t c) {
  ps.add(prefix + "gamma", Tensor4D(Shape{c, 1, 1, 1}, Real(1)));
  ps.add(prefix + "beta", Tensor4D(Shape{c, 1, 1, 1}, Real(0)));
  ps.add_buffer(prefix + "running_mean", Tensor4D(Shape{c, 1, 1, 1}, Real(0)));
  ps.add_buffer(prefix + "running_var", Tensor4D(Shape{c, 1, 1, 1}, Real(1)));
}

std::string layer_prefix(std::size_t index, std::size_t rep) {
  return "l" + std::to_string(index) + ".r" + std::to_string(rep) + ".";
}

ad::Var param(ad::Tape& tape, ParamStore& ps, const std::string& name, bool requires_grad) {
  Parameter& p = ps.get(name);
  return tape.param(p.tensor, requires_grad && p.trainable && !p.frozen);
}

ad::Var bn_apply(ad::Tape& tape, const ad::Var& x, ParamStore& ps, const std::string& prefix,
                 bool training, bool requires_grad) {
  ad::BatchNormOptions opts;
  opts.training = training;
  return ad::batchnorm2d(x, param(tape, ps, prefix + "gamma", requires_grad),
                         param(tape, ps, prefix + "beta", requires_grad),
                         ps.get(prefix + "running_mean").tensor.data(),
                         ps.get(prefix + "running_var").tensor.data(), opts);
}

}  // namespace

ModelGraph::ModelGraph(Role role, std::size_t in_channels, std::vector<LayerSpec> layers,
                       std::uint64_t seed)
    : role_(role), in_channels_(in_channels), layers_(std::move(layers)),
      params_(std::make_unique<ParamStore>()) {
  build(seed);
}

ModelGraph::ModelGraph(const ModelGraph& other)
    : role_(other.role_), in_channels_(other.in_channels_), out_channels_(other.out_channels_),
      layers_(other.layers_), params_(std::make_unique<ParamStore>(*other.params_)),
      frozen_(other.frozen_) {}

ModelGraph& ModelGraph::operator=(const ModelGraph& other) {
  if (this != &other) {
    ModelGraph tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

void ModelGraph::build(std::uint64_t seed) {
  Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(role_) + 1));
  ParamStore& ps = *params_;
  std::size_t c = in_channels_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& L = layers_[i];
    FPC_CHECK(L.repeat >= 1, ConfigError, "layer repeat must be >= 1");
    for (std::size_t r = 0; r < L.repeat; ++r) {
      const std::string pre = layer_prefix(i, r);
      switch (L.kind) {
        case LayerKind::Conv:
        case LayerKind::Deconv: {
          const std::size_t k = L.kernel;
          const std::size_t out = L.out_channels;
          FPC_CHECK(out > 0 && k > 0, ConfigError, "conv layer needs channels and kernel");
          if (L.kind == LayerKind::Conv) {
            Tensor4D w(Shape{out, c, k, k});
            init_uniform(w, c * k * k, L.use_act, rng);
            ps.add(pre + "conv.weight", std::move(w));
          } else {
            Tensor4D w(Shape{c, out, k, k});
            init_uniform(w, c * k * k / (L.stride * L.stride), L.use_act, rng);
            ps.add(pre + "conv.weight", std::move(w));
          }
          if (L.use_bn)
            add_bn(ps, pre + "bn.", out);
          else
            ps.add(pre + "conv.bias", Tensor4D(Shape{out, 1, 1, 1}));
          c = out;
          break;
        }
        case LayerKind::ResBlock: {
          FPC_CHECK(L.out_channels == c, ConfigError,
                    "ResBlock width " + std::to_string(L.out_channels) + " != input channels " +
                        std::to_string(c));
          Tensor4D w1(Shape{c, c, 3, 3});
          init_uniform(w1, c * 9, true, rng);
          ps.add(pre + "conv1.weight", std::move(w1));
          if (L.use_bn)
            add_bn(ps, pre + "bn.", c);
          else
            ps.add(pre + "conv1.bias", Tensor4D(Shape{c, 1, 1, 1}));
          Tensor4D w2(Shape{c, c, 3, 3});
          init_uniform(w2, c * 9, false, rng);
          ps.add(pre + "conv2.weight", std::move(w2));
          ps.add(pre + "conv2.bias", Tensor4D(Shape{c, 1, 1, 1}));
          break;
        }
        case LayerKind::GlobalPool:
          break;
        case LayerKind::Linear: {
          Tensor4D w(Shape{L.out_channels, c, 1, 1});
          init_uniform(w, c, false, rng);
          ps.add(pre + "linear.weight", std::move(w));
          ps.add(pre + "linear.bias", Tensor4D(Shape{L.out_channels, 1, 1, 1}));
          c = L.out_channels;
          break;
        }
      }
    }
  }
  out_channels_ = c;
}

ad::Var resblock_forward(ad::Tape& tape, const ad::Var& x, ParamStore& ps,
                         const std::string& prefix, bool use_bn, bool bn_training,
                         bool params_require_grad) {
  const std::size_t c = ps.get(prefix + "conv1.weight").tensor.shape().n;
  FPC_CHECK(x.shape().c == c, ShapeError,
            "ResBlock of width " + std::to_string(c) + " got " + std::to_string(x.shape().c) +
                " channels");
  const bool g = params_require_grad;
  ad::Var h = ad::conv2d(x, param(tape, ps, prefix + "conv1.weight", g),
                         use_bn ? std::nullopt
                                : std::optional(param(tape, ps, prefix + "conv1.bias", g)),
                         1, 1);
  if (use_bn) h = bn_apply(tape, h, ps, prefix + "bn.", bn_training, g);
  h = ad::silu(h);
  h = ad::conv2d(h, param(tape, ps, prefix + "conv2.weight", g),
                 param(tape, ps, prefix + "conv2.bias", g), 1, 1);
  return ad::add(x, h);
}

ad::Var ModelGraph::forward(ad::Tape& tape, const ad::Var& x, ForwardMode mode) {
  return run(tape, x, mode == ForwardMode::Train && !frozen_);
}

ad::Var ModelGraph::forward_eval(ad::Tape& tape, const ad::Var& x) const {
  return run(tape, x, false);
}

ad::Var ModelGraph::run(ad::Tape& tape, const ad::Var& x, bool train) const {
  FPC_CHECK(x.shape().c == in_channels_, ShapeError,
            to_string(role_) + " expects " + std::to_string(in_channels_) + " channels, got " +
                x.shape().str());
  ParamStore& ps = *params_;
  ad::Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& L = layers_[i];
    for (std::size_t r = 0; r < L.repeat; ++r) {
      const std::string pre = layer_prefix(i, r);
      switch (L.kind) {
        case LayerKind::Conv:
        case LayerKind::Deconv: {
          ad::Var w = param(tape, ps, pre + "conv.weight", train);
          std::optional<ad::Var> b;
          if (!L.use_bn) b = param(tape, ps, pre + "conv.bias", train);
          h = L.kind == LayerKind::Conv ? ad::conv2d(h, w, b, L.stride, L.padding)
                                        : ad::deconv2d(h, w, b, L.stride, L.padding);
          if (L.use_bn) h = bn_apply(tape, h, ps, pre + "bn.", train, train);
          if (L.use_act) h = ad::silu(h);
          break;
        }
        case LayerKind::ResBlock:
          h = resblock_forward(tape, h, ps, pre, L.use_bn, train, train);
          break;
        case LayerKind::GlobalPool:
          h = ad::global_avg_pool(h);
          break;
        case LayerKind::Linear:
          h = ad::linear(h, param(tape, ps, pre + "linear.weight", train),
                         param(tape, ps, pre + "linear.bias", train));
          break;
      }
    }
  }
  return h;
}

Tensor4D ModelGraph::infer(const Tensor4D& x) const {
  ad::Tape tape;
  return forward_eval(tape, tape.constant(x)).value();
}

Shape ModelGraph::output_shape(const Shape& in) const {
  FPC_CHECK(in.c == in_channels_, ShapeError,
            to_string(role_) + " expects " + std::to_string(in_channels_) + " channels");
  Shape s = in;
  for (const LayerSpec& L : layers_) {
    for (std::size_t r = 0; r < L.repeat; ++r) {
      switch (L.kind) {
        case LayerKind::Conv:
          s = Shape{s.n, L.out_channels, kernels::conv_out_size(s.h, L.kernel, L.stride, L.padding),
                    kernels::conv_out_size(s.w, L.kernel, L.stride, L.padding)};
          break;
        case LayerKind::Deconv:
          s = Shape{s.n, L.out_channels,
                    kernels::deconv_out_size(s.h, L.kernel, L.stride, L.padding),
                    kernels::deconv_out_size(s.w, L.kernel, L.stride, L.padding)};
          break;
        case LayerKind::ResBlock:
          break;
        case LayerKind::GlobalPool:
          s.h = s.w = 1;
          break;
        case LayerKind::Linear:
          s = Shape{s.n, L.out_channels, 1, 1};
          break;
      }
    }
  }
  return s;
}

void ModelGraph::set_frozen(bool frozen) {
  frozen_ = frozen;
  params_->set_frozen(frozen);
}

void set_frozen(ModelGraph& model, bool frozen) { model.set_frozen(frozen); }

void SplitConfig::validate() const {
  FPC_CHECK(input_channels >= 1, ConfigError, "input_channels must be >= 1");
  FPC_CHECK(bottleneck_channels >= 1 && bottleneck_channels * 3 == frontend_channels, ConfigError,
            "frontend_channels must be exactly 3x bottleneck_channels (got " +
                std::to_string(frontend_channels) + " / " + std::to_string(bottleneck_channels) + ")");
  FPC_CHECK(bottleneck_channels < frontend_channels, ConfigError, "bottleneck must reduce channels");
  FPC_CHECK(downsample_factor == 1 || downsample_factor == 2 || downsample_factor == 4 ||
                downsample_factor == 8,
            ConfigError, "downsample_factor must be one of 1, 2, 4, 8");
  FPC_CHECK(input_h >= 8 && input_w >= 8, ConfigError, "input must be at least 8x8");
  FPC_CHECK(input_h % (downsample_factor * 2) == 0 && input_w % (downsample_factor * 2) == 0,
            ConfigError, "input size must be divisible by 2x the downsample factor");
  FPC_CHECK(num_classes >= 2, ConfigError, "num_classes must be >= 2");
  FPC_CHECK(resblock_repeats >= 1, ConfigError, "resblock_repeats must be >= 1");
}

namespace {

int log2_factor(std::size_t f) {
  int m = 0;
  while ((std::size_t{1} << m) < f) ++m;
  return m;
}

constexpr std::size_t kWidth = 32;
constexpr std::size_t kStem = 16;

std::vector<LayerSpec> recnet_layers(const SplitConfig& cfg, RecNetVariant variant) {
  const int m = log2_factor(cfg.downsample_factor);
  const std::size_t rep = cfg.resblock_repeats;
  std::vector<LayerSpec> layers;
  if (variant == RecNetVariant::Bottleneck) {
    layers.push_back(LayerSpec::conv(kWidth, 3, 1));
    layers.push_back(LayerSpec::resblock(kWidth, rep));
    layers.push_back(LayerSpec::conv(cfg.frontend_channels, 3, 1));
  }
  for (int i = 2; i < m; ++i) layers.push_back(LayerSpec::deconv(cfg.frontend_channels, 4, 2));
  layers.push_back(m >= 1 ? LayerSpec::deconv(kWidth, 4, 2) : LayerSpec::conv(kWidth, 3, 1));
  layers.push_back(LayerSpec::resblock(kWidth, rep));
  layers.push_back(m >= 2 ? LayerSpec::deconv(kStem, 4, 2) : LayerSpec::conv(kStem, 3, 1));
  layers.push_back(LayerSpec::conv(cfg.input_channels, 3, 1, false, false));
  return layers;
}

}  // namespace

ModelGraph build_recnet(const SplitConfig& cfg, RecNetVariant variant, std::uint64_t seed) {
  cfg.validate();
  const std::size_t in = variant == RecNetVariant::Bottleneck ? cfg.bottleneck_channels
                                                              : cfg.frontend_channels;
  return ModelGraph(Role::RecNet, in, recnet_layers(cfg, variant),
                    variant == RecNetVariant::Bottleneck ? seed : Rng::derive(seed, 0x1a7e));
}

ModelSet build_default_models(const SplitConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int m = log2_factor(cfg.downsample_factor);
  const std::size_t rep = cfg.resblock_repeats;
  const std::size_t cf = cfg.frontend_channels;
  const std::size_t cb = cfg.bottleneck_channels;

  std::vector<LayerSpec> front{
      LayerSpec::conv(kStem, 3, 1),
      LayerSpec::conv(kWidth, 3, m >= 2 ? 2 : 1),
      LayerSpec::resblock(kWidth, rep),
      LayerSpec::conv(cf, 3, m >= 1 ? 2 : 1),
  };
  for (int i = 2; i < m; ++i) front.push_back(LayerSpec::conv(cf, 3, 2));

  // No batch-norm anywhere in the encoder; the last conv is linear.
  std::vector<LayerSpec> ae{
      LayerSpec::conv(kWidth, 3, 1, false, true),
      LayerSpec::resblock(kWidth, rep, false),
      LayerSpec::conv(cb, 3, 1, false, false),
  };
  std::vector<LayerSpec> ad{
      LayerSpec::conv(kWidth, 3, 1),
      LayerSpec::resblock(kWidth, rep),
      LayerSpec::conv(cf, 3, 1),
  };
  std::vector<LayerSpec> back{
      LayerSpec::resblock(cf, rep),
      LayerSpec::conv(cf, 3, 2),
      LayerSpec::global_pool(),
      LayerSpec::linear(cfg.num_classes),
  };

  ModelSet set{
      ModelGraph(Role::Frontend, cfg.input_channels, std::move(front), seed),
      ModelGraph(Role::AE, cf, std::move(ae), seed),
      ModelGraph(Role::AD, cb, std::move(ad), seed),
      ModelGraph(Role::Backend, cf, std::move(back), seed),
      build_recnet(cfg, RecNetVariant::Bottleneck, seed),
  };
  // Shape-chain check for the configured input.
  const Shape in{1, cfg.input_channels, cfg.input_h, cfg.input_w};
  const Shape feat = set.frontend.output_shape(in);
  FPC_CHECK(feat.h * cfg.downsample_factor == cfg.input_h, ConfigError, "frontend stride mismatch");
  const Shape bott = set.ae.output_shape(feat);
  set.backend.output_shape(set.ad.output_shape(bott));
  FPC_CHECK(set.recnet.output_shape(bott) == in, ConfigError, "RecNet does not mirror the input");
  return set;
}

ad::Var forward_pipeline(ad::Tape& tape, const ad::Var& x, const std::vector<ModelGraph*>& stages,
                         ForwardMode mode) {
  ad::Var h = x;
  for (ModelGraph* g : stages) h = g->forward(tape, h, mode);
  return h;
}

Tensor4D infer_pipeline(const Tensor4D& x, const std::vector<const ModelGraph*>& stages) {
  if (stages.empty()) return x;
  ad::Tape tape;
  ad::Var h = tape.constant(x);
  for (const ModelGraph* g : stages) h = g->forward_eval(tape, h);
  return h.value();
}

Tensor4D normalize_images(const Tensor4D& images_255) {
  Tensor4D out(images_255.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = images_255[i] / Real(255);
  return out;
}

}  // namespace fpc::nets
