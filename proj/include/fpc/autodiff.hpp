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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fpc/tensor.hpp"

namespace fpc::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor4D& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  // Gradient accumulated by the last Tape::backward (zeros if none reached it).
  std::span<const Real> grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records one forward pass (one batch) and replays it in reverse. A node
// requires a gradient iff it is a trainable leaf or any of its inputs does,
// so frozen sub-networks fed by non-differentiable inputs cost no backward
// work at all.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor4D value);
  Var leaf(Tensor4D value, bool requires_grad);
  // Aliases caller-owned storage (a model parameter). Gradients accumulate
  // into `storage`'s own grad buffer; the storage must outlive the tape.
  Var param(Tensor4D& storage, bool requires_grad);

  // Registers an op result. `backward` reads this node's gradient and
  // accumulates into the inputs' gradients.
  Var record(Tensor4D value, bool requires_grad, BackwardFn backward);

  // Seeds d(out)/d(out) = seed for a scalar output and runs the reverse sweep.
  void backward(const Var& out, Real seed = Real(1));

  Tensor4D& tensor(std::size_t id);
  const Tensor4D& tensor(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient span of a node, allocated on first use.
  std::span<Real> grad(std::size_t id) { return tensor(id).grad(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor4D own;
    Tensor4D* external = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- differentiable ops --------------------------------------------------

Var conv2d(const Var& x, const Var& weight, std::optional<Var> bias, std::size_t stride,
           std::size_t padding);
Var deconv2d(const Var& x, const Var& weight, std::optional<Var> bias, std::size_t stride,
             std::size_t padding);

struct BatchNormOptions {
  bool training = true;
  Real eps = Real(1e-5);
  Real momentum = Real(0.1);
};
// running_mean / running_var are updated in place in training mode.
Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, std::span<Real> running_mean,
                std::span<Real> running_var, const BatchNormOptions& opts);

Var silu(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, Real s);
// a + alpha * b for same-shape operands.
Var add_scaled(const Var& a, const Var& b, Real alpha);
Var global_avg_pool(const Var& x);
// x: N x C x H x W (flattened to N x CHW), weight: K x CHW x 1 x 1, bias: K x 1 x 1 x 1.
Var linear(const Var& x, const Var& weight, const Var& bias);
Var depthwise3x3(const Var& x, const std::array<Real, 9>& kernel);

// Scalar reductions (result is 1x1x1x1).
Var mean_abs(const Var& x);  // subgradient 0 at 0
Var dot(const Var& x, const Tensor4D& weights);
Var cross_entropy(const Var& logits, std::span<const std::int32_t> labels);

}  // namespace fpc::ad
