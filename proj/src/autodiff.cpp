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

#include "fpc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "fpc/error.hpp"
#include "fpc/kernels.hpp"

namespace fpc::ad {

const Tensor4D& Var::value() const {
  FPC_CHECK(tape_ != nullptr, StateError, "use of an unbound Var");
  return tape_->tensor(id_);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(id_); }

std::span<const Real> Var::grad() const {
  FPC_CHECK(tape_ != nullptr, StateError, "use of an unbound Var");
  return tape_->grad(id_);
}

Var Tape::constant(Tensor4D value) { return leaf(std::move(value), false); }

Var Tape::leaf(Tensor4D value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), nullptr, requires_grad, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Tensor4D& storage, bool requires_grad) {
  nodes_.push_back(Node{Tensor4D{}, &storage, requires_grad, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor4D value, bool requires_grad, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), nullptr, requires_grad,
                        requires_grad ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor4D& Tape::tensor(std::size_t id) {
  Node& n = nodes_.at(id);
  return n.external ? *n.external : n.own;
}

const Tensor4D& Tape::tensor(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.own;
}

void Tape::backward(const Var& out, Real seed) {
  FPC_CHECK(out.tape() == this, StateError, "backward called with a Var from another tape");
  FPC_CHECK(out.value().numel() == 1, ShapeError,
            "backward needs a scalar output, got " + out.shape().str());
  if (!nodes_[out.id()].requires_grad) return;
  grad(out.id())[0] += seed;
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward && tensor(i).has_grad()) n.backward(*this, i);
  }
}

namespace {

Tape& same_tape(std::initializer_list<const Var*> vars) {
  Tape* t = nullptr;
  for (const Var* v : vars) {
    if (!v || !v->valid()) continue;
    FPC_CHECK(t == nullptr || v->tape() == t, StateError, "ops mix Vars from different tapes");
    t = v->tape();
  }
  FPC_CHECK(t != nullptr, StateError, "op called without a bound Var");
  return *t;
}

std::span<Real> grad_if(Tape& t, std::size_t id) {
  return t.requires_grad(id) ? t.grad(id) : std::span<Real>{};
}

// Materializes a node's gradient as a tensor for the kernel interfaces.
Tensor4D grad_tensor(Tape& t, std::size_t id) {
  const auto g = t.grad(id);
  return Tensor4D(t.tensor(id).shape(), std::vector<Real>(g.begin(), g.end()));
}

Tensor4D scalar(Real v) { return Tensor4D(Shape{1, 1, 1, 1}, v); }

}  // namespace

Var conv2d(const Var& x, const Var& weight, std::optional<Var> bias, std::size_t stride,
           std::size_t padding) {
  Tape& t = same_tape({&x, &weight, bias ? &*bias : nullptr});
  std::span<const Real> b = bias ? bias->value().data() : std::span<const Real>{};
  Tensor4D out = kernels::conv2d(x.value(), weight.value(), b, stride, padding);
  const bool req = x.requires_grad() || weight.requires_grad() || (bias && bias->requires_grad());
  const std::size_t xi = x.id(), wi = weight.id();
  const std::optional<std::size_t> bi = bias ? std::optional(bias->id()) : std::nullopt;
  return t.record(std::move(out), req, [=](Tape& tp, std::size_t self) {
    kernels::conv2d_backward(tp.tensor(xi), tp.tensor(wi), grad_tensor(tp, self), stride, padding,
                             grad_if(tp, xi), grad_if(tp, wi),
                             bi ? grad_if(tp, *bi) : std::span<Real>{});
  });
}

Var deconv2d(const Var& x, const Var& weight, std::optional<Var> bias, std::size_t stride,
             std::size_t padding) {
  Tape& t = same_tape({&x, &weight, bias ? &*bias : nullptr});
  std::span<const Real> b = bias ? bias->value().data() : std::span<const Real>{};
  Tensor4D out = kernels::deconv2d(x.value(), weight.value(), b, stride, padding);
  const bool req = x.requires_grad() || weight.requires_grad() || (bias && bias->requires_grad());
  const std::size_t xi = x.id(), wi = weight.id();
  const std::optional<std::size_t> bi = bias ? std::optional(bias->id()) : std::nullopt;
  return t.record(std::move(out), req, [=](Tape& tp, std::size_t self) {
    kernels::deconv2d_backward(tp.tensor(xi), tp.tensor(wi), grad_tensor(tp, self), stride,
                               padding, grad_if(tp, xi), grad_if(tp, wi),
                               bi ? grad_if(tp, *bi) : std::span<Real>{});
  });
}

Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, std::span<Real> running_mean,
                std::span<Real> running_var, const BatchNormOptions& opts) {
  Tape& t = same_tape({&x, &gamma, &beta});
  FPC_CHECK(running_mean.size() == x.shape().c && running_var.size() == x.shape().c, ShapeError,
            "batchnorm running statistics do not match channel count");
  auto cache = std::make_shared<kernels::BatchNormCache>();
  Tensor4D out = opts.training
                     ? kernels::batchnorm2d_train(x.value(), gamma.value().data(),
                                                  beta.value().data(), opts.eps, opts.momentum,
                                                  running_mean, running_var, cache.get())
                     : kernels::batchnorm2d_eval(x.value(), gamma.value().data(),
                                                 beta.value().data(), opts.eps, running_mean,
                                                 running_var, cache.get());
  const bool req = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  const std::size_t xi = x.id(), gi = gamma.id(), bi = beta.id();
  const bool training = opts.training;
  return t.record(std::move(out), req, [=](Tape& tp, std::size_t self) {
    const Tensor4D dout = grad_tensor(tp, self);
    const auto g = tp.tensor(gi).data();
    if (training)
      kernels::batchnorm2d_backward_train(*cache, g, dout, grad_if(tp, xi), grad_if(tp, gi),
                                          grad_if(tp, bi));
    else
      kernels::batchnorm2d_backward_eval(*cache, g, dout, grad_if(tp, xi), grad_if(tp, gi),
                                         grad_if(tp, bi));
  });
}

Var silu(const Var& x) {
  Tape& t = *x.tape();
  Tensor4D out(x.shape());
  const auto xv = x.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = kernels::silu(xv[i]);
  const std::size_t xi = x.id();
  return t.record(std::move(out), x.requires_grad(), [=](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    const auto xs = tp.tensor(xi).data();
    auto dx = tp.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * kernels::silu_grad(xs[i]);
  });
}

Var add_scaled(const Var& a, const Var& b, Real alpha) {
  Tape& t = same_tape({&a, &b});
  FPC_CHECK(a.shape() == b.shape(), ShapeError,
            "elementwise op on " + a.shape().str() + " and " + b.shape().str());
  Tensor4D out(a.shape());
  const auto av = a.value().data();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + alpha * bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [=](Tape& tp, std::size_t self) {
                    const auto g = tp.grad(self);
                    if (tp.requires_grad(ai)) {
                      auto da = tp.grad(ai);
                      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                    }
                    if (tp.requires_grad(bi)) {
                      auto db = tp.grad(bi);
                      for (std::size_t i = 0; i < g.size(); ++i) db[i] += alpha * g[i];
                    }
                  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape({&a, &b});
  FPC_CHECK(a.shape() == b.shape(), ShapeError,
            "elementwise op on " + a.shape().str() + " and " + b.shape().str());
  Tensor4D out(a.shape());
  const auto av = a.value().data();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [=](Tape& tp, std::size_t self) {
                    const auto g = tp.grad(self);
                    for (std::size_t id : {ai, bi}) {
                      if (!tp.requires_grad(id)) continue;
                      auto d = tp.grad(id);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                    }
                  });
}

Var sub(const Var& a, const Var& b) { return add_scaled(a, b, Real(-1)); }

Var scale(const Var& a, Real s) {
  Tape& t = *a.tape();
  Tensor4D out(a.shape());
  const auto av = a.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = s * av[i];
  const std::size_t ai = a.id();
  return t.record(std::move(out), a.requires_grad(), [=](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    auto d = tp.grad(ai);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += s * g[i];
  });
}

Var global_avg_pool(const Var& x) {
  Tape& t = *x.tape();
  const Shape s = x.shape();
  FPC_CHECK(s.plane() > 0, ShapeError, "global pool over empty plane");
  Tensor4D out(Shape{s.n, s.c, 1, 1});
  const auto xv = x.value().data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    double acc = 0;
    for (std::size_t i = 0; i < s.plane(); ++i) acc += xv[p * s.plane() + i];
    out[p] = static_cast<Real>(acc / static_cast<double>(s.plane()));
  }
  const std::size_t xi = x.id();
  return t.record(std::move(out), x.requires_grad(), [=](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    auto dx = tp.grad(xi);
    const Real inv = Real(1) / static_cast<Real>(s.plane());
    for (std::size_t p = 0; p < s.n * s.c; ++p)
      for (std::size_t i = 0; i < s.plane(); ++i) dx[p * s.plane() + i] += g[p] * inv;
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Tape& t = same_tape({&x, &weight, &bias});
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const std::size_t d = xs.sample();
  FPC_CHECK(ws.c * ws.h * ws.w == d, ShapeError,
            "linear layer expects " + std::to_string(ws.c * ws.h * ws.w) + " inputs, got " +
                std::to_string(d));
  FPC_CHECK(bias.value().numel() == ws.n, ShapeError, "linear bias length mismatch");
  const std::size_t k = ws.n;
  Tensor4D out(Shape{xs.n, k, 1, 1});
  const auto xv = x.value().data();
  const auto wv = weight.value().data();
  const auto bv = bias.value().data();
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t o = 0; o < k; ++o) {
      Real acc = bv[o];
      for (std::size_t i = 0; i < d; ++i) acc += wv[o * d + i] * xv[n * d + i];
      out[n * k + o] = acc;
    }
  const std::size_t xi = x.id(), wi = weight.id(), bi = bias.id();
  const bool req = x.requires_grad() || weight.requires_grad() || bias.requires_grad();
  return t.record(std::move(out), req, [=](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    const auto xs_ = tp.tensor(xi).data();
    const auto ws_ = tp.tensor(wi).data();
    auto dx = grad_if(tp, xi);
    auto dw = grad_if(tp, wi);
    auto db = grad_if(tp, bi);
    for (std::size_t n = 0; n < xs.n; ++n)
      for (std::size_t o = 0; o < k; ++o) {
        const Real go = g[n * k + o];
        if (!db.empty()) db[o] += go;
        for (std::size_t i = 0; i < d; ++i) {
          if (!dw.empty()) dw[o * d + i] += go * xs_[n * d + i];
          if (!dx.empty()) dx[n * d + i] += go * ws_[o * d + i];
        }
      }
  });
}

Var depthwise3x3(const Var& x, const std::array<Real, 9>& kernel) {
  Tape& t = *x.tape();
  Tensor4D out = kernels::depthwise3x3(x.value(), kernel);
  const std::size_t xi = x.id();
  return t.record(std::move(out), x.requires_grad(), [=](Tape& tp, std::size_t self) {
    kernels::depthwise3x3_backward(grad_tensor(tp, self), kernel, tp.grad(xi));
  });
}

Var mean_abs(const Var& x) {
  Tape& t = *x.tape();
  const auto xv = x.value().data();
  FPC_CHECK(!xv.empty(), ShapeError, "mean_abs of an empty tensor");
  double acc = 0;
  for (Real v : xv) acc += std::abs(v);
  const double n = static_cast<double>(xv.size());
  const std::size_t xi = x.id();
  return t.record(scalar(static_cast<Real>(acc / n)), x.requires_grad(),
                  [=](Tape& tp, std::size_t self) {
                    const Real g = tp.grad(self)[0] / static_cast<Real>(n);
                    const auto xs = tp.tensor(xi).data();
                    auto dx = tp.grad(xi);
                    for (std::size_t i = 0; i < xs.size(); ++i) {
                      if (xs[i] > 0)
                        dx[i] += g;
                      else if (xs[i] < 0)
                        dx[i] -= g;
                    }
                  });
}

Var dot(const Var& x, const Tensor4D& weights) {
  Tape& t = *x.tape();
  FPC_CHECK(x.shape() == weights.shape(), ShapeError, "dot operands differ in shape");
  const auto xv = x.value().data();
  const auto wv = weights.data();
  double acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += static_cast<double>(xv[i]) * wv[i];
  const std::size_t xi = x.id();
  return t.record(scalar(static_cast<Real>(acc)), x.requires_grad(),
                  [=](Tape& tp, std::size_t self) {
                    const Real g = tp.grad(self)[0];
                    const auto w = weights.data();
                    auto dx = tp.grad(xi);
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g * w[i];
                  });
}

Var cross_entropy(const Var& logits, std::span<const std::int32_t> labels) {
  Tape& t = *logits.tape();
  const Shape s = logits.shape();
  FPC_CHECK(s.h == 1 && s.w == 1, ShapeError, "cross_entropy expects N x K x 1 x 1 logits");
  FPC_CHECK(labels.size() == s.n, ShapeError, "label count does not match batch size");
  const std::size_t k = s.c;
  const auto z = logits.value().data();
  auto probs = std::make_shared<std::vector<Real>>(s.n * k);
  double total = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto label = labels[n];
    FPC_CHECK(label >= 0 && static_cast<std::size_t>(label) < k, ArgumentError,
              "label " + std::to_string(label) + " out of range [0," + std::to_string(k) + ")");
    const Real* row = z.data() + n * k;
    const double mx = *std::max_element(row, row + k);
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < k; ++j)
      (*probs)[n * k + j] = static_cast<Real>(std::exp(row[j] - lse));
    total += lse - row[static_cast<std::size_t>(label)];
  }
  std::vector<std::int32_t> lab(labels.begin(), labels.end());
  const std::size_t li = logits.id();
  return t.record(scalar(static_cast<Real>(total / static_cast<double>(s.n))),
                  logits.requires_grad(), [=, lab = std::move(lab)](Tape& tp, std::size_t self) {
                    const Real g = tp.grad(self)[0] / static_cast<Real>(s.n);
                    auto dz = tp.grad(li);
                    for (std::size_t n = 0; n < s.n; ++n)
                      for (std::size_t j = 0; j < k; ++j) {
                        const Real onehot = static_cast<std::size_t>(lab[n]) == j ? Real(1) : Real(0);
                        dz[n * k + j] += g * ((*probs)[n * k + j] - onehot);
                      }
                  });
}

}  // namespace fpc::ad
